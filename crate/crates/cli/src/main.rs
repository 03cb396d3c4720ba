fn main() {
    std::process::exit(klucb::commands::main_with_args(std::env::args_os()));
}
