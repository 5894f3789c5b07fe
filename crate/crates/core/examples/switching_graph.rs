//! Simulates every ordered switch of the family and summarizes the
//! resulting transition graph.
//!
//! ```text
//! cargo run --release --example switching_graph -- artifacts
//! ```

mod common;

fn main() {
    env_logger::init();
    common::exit_on_error(run());
}

fn run() -> hzd_gaits::Result<()> {
    let p = common::pipeline()?;
    let g = p.graph()?;
    let feasible = g.feasible_edges().count();
    println!("{} nodes, {feasible} of {} edges feasible at epsilon = {}", g.len(), g.edges.len(), g.epsilon);
    let comps = g.components();
    println!("strongly connected: {} ({} components)", g.is_strongly_connected(), comps.len());
    let tight = g.feasible_edges().filter(|e| e.measured_steps == Some(e.weight)).count();
    println!("edges whose measured dwell equals the bound: {tight}");
    // the largest speed jump each node can make in one switch
    for n in &g.nodes {
        let reach = g
            .feasible_edges()
            .filter(|e| e.from == n.index)
            .map(|e| g.nodes[e.to].speed - n.speed)
            .fold((0.0f64, 0.0f64), |(lo, hi), dv| (lo.min(dv), hi.max(dv)));
        println!("  {:>3} {:.4} m/s  one switch reaches {:+.3} .. {:+.3}", n.index, n.speed, reach.0, reach.1);
    }
    Ok(())
}
