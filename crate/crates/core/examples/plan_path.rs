//! Minimum-dwell gait sequence between two speeds.
//!
//! ```text
//! cargo run --release --example plan_path -- artifacts 0.85 0.58
//! ```

mod common;

fn main() {
    env_logger::init();
    common::exit_on_error(run());
}

fn run() -> hzd_gaits::Result<()> {
    let p = common::pipeline()?;
    let plan = p.plan(common::speed_arg(1, 0.85), common::speed_arg(2, 0.58))?;
    let graph = p.load_graph()?;
    for w in plan.nodes.windows(2) {
        let e = graph.edge(w[0], w[1]).expect("planned edges exist");
        println!(
            "{:>3} ({:.4}) -> {:>3} ({:.4})  dwell bound {:>2}, measured {:?}",
            w[0], graph.nodes[w[0]].speed, w[1], graph.nodes[w[1]].speed, e.weight, e.measured_steps
        );
    }
    println!("{} switches, {} steps in total", plan.switches(), plan.total_steps);
    Ok(())
}
