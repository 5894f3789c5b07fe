//! Tracks a speed schedule with the supervisor and prints each transition.
//! The schedule comes from the configuration (`run.schedule`) unless given
//! as the second argument, e.g. `"0:0.85,80:0.58,200:0.85"`.
//!
//! ```text
//! cargo run --release --example supervisor_run -- artifacts "0:0.85,80:0.58,200:0.85"
//! ```

mod common;

fn main() {
    env_logger::init();
    common::exit_on_error(run());
}

fn run() -> hzd_gaits::Result<()> {
    let mut p = common::pipeline()?;
    if let Some(s) = std::env::args().nth(2) {
        p.config.run.schedule = s;
    }
    let (art, summary) = p.run()?;
    for t in &summary.transitions {
        println!(
            "entry {}: want {:.3} m/s, gaits {:?}, {} switches, converged at step {:?}, final speed {:.4}",
            t.entry, t.desired_speed, t.planned, t.switches, t.converged_at, t.final_speed
        );
    }
    println!(
        "{} steps over {:.1} s; max torque {:.1} N·m, min F_n {:.1} N, max |F_t|/F_n {:.3}",
        summary.steps,
        summary.duration_s,
        art.margins.max_torque,
        art.margins.min_normal_force,
        art.margins.max_friction_ratio
    );
    Ok(())
}
