fn main() {
    std::process::exit(phonon_lattice::cli::main_with(std::env::args_os()));
}
