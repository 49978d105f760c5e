fn main() {
    std::process::exit(rirforge::cli::dispatch(std::env::args_os()));
}
