fn main() {
    std::process::exit(hnls_cli::main_with(std::env::args_os()));
}
