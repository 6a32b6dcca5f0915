fn main() {
    std::process::exit(nfvslice::cli::run(std::env::args_os()));
}
