fn main() {
    std::process::exit(stylo_cli::run(std::env::args_os()));
}
