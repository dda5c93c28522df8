fn main() {
    std::process::exit(sausage_lab::main_with_env());
}
