fn main() {
    std::process::exit(tmholo_cli::main_with_args(std::env::args_os()));
}
