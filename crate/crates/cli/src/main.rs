fn main() {
    std::process::exit(tneat_cli::main_with_args(std::env::args_os()));
}
