fn main() {
    std::process::exit(covert_ct::cli::run(std::env::args_os()));
}
