fn main() {
    std::process::exit(btss_cli::run(std::env::args_os()));
}
