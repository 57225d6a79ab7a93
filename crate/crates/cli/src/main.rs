use clap::Parser;

fn main() {
    let args = treelab_cli::Args::parse();
    std::process::exit(treelab_cli::run(&args));
}
