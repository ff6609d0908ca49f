fn main() {
    std::process::exit(sra::cli::run_from(std::env::args_os()));
}
