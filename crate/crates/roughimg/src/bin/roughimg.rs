fn main() {
    roughimg::cli::main()
}
