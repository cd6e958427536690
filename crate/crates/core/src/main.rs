fn main() {
    std::process::exit(vsdn::cli::dispatch(std::env::args_os()));
}
