fn main() {
    std::process::exit(modcert::cli::run(std::env::args_os()));
}
