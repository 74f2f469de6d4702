fn main() {
    std::process::exit(nbest_toolkit::cli::dispatch(std::env::args_os()));
}
