fn main() {
    std::process::exit(nystrom_klr::cli::run(std::env::args_os()));
}
