fn main() {
    std::process::exit(bergeo_cli::run(std::env::args_os()));
}
