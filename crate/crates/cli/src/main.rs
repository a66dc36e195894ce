fn main() {
    std::process::exit(hnls_cli::run(std::env::args_os()));
}
