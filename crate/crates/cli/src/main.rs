fn main() {
    std::process::exit(lungnet_cli::run(std::env::args_os()));
}
