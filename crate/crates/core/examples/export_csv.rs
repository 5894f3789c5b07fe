//! Writes the plot inputs (orbit projections, gait table, edge list).
//!
//! ```text
//! cargo run --release --example export_csv -- artifacts
//! ```

mod common;

fn main() {
    env_logger::init();
    common::exit_on_error(run());
}

fn run() -> hzd_gaits::Result<()> {
    for path in common::pipeline()?.export()? {
        println!("{}", path.display());
    }
    Ok(())
}
