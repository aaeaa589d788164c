fn main() {
    std::process::exit(vqg_cli::main_with_args(std::env::args_os()));
}
