fn main() {
    std::process::exit(sfd::cli::run(std::env::args()));
}
