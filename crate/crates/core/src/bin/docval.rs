fn main() {
    std::process::exit(docval::cli::run(std::env::args_os()));
}
