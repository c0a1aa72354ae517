fn main() {
    std::process::exit(racebook_cli::dispatch(std::env::args_os()));
}
