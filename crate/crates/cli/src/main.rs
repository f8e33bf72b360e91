fn main() {
    std::process::exit(thetalift_cli::main_with_args(std::env::args_os()));
}
