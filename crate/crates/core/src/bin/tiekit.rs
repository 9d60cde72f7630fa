fn main() {
    std::process::exit(tiekit::cli::main());
}
