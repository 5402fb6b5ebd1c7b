fn main() {
    std::process::exit(pathflow_cli::main_with_args(std::env::args_os()));
}
