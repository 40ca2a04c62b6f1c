fn main() {
    std::process::exit(sraf::cli::run(std::env::args_os()));
}
