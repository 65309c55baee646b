fn main() {
    std::process::exit(qrecon_cli::main_with_args(std::env::args_os()));
}
