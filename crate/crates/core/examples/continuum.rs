//! Grows the speed-indexed family from the base gait and prints one line
//! per member.
//!
//! ```text
//! cargo run --release --example continuum -- artifacts [speed_lo] [speed_hi]
//! ```

mod common;

use hzd_gaits::continuum::ContinuumOptions;

fn main() {
    env_logger::init();
    common::exit_on_error(run());
}

fn run() -> hzd_gaits::Result<()> {
    let p = common::pipeline()?;
    let c = p.config.continuum;
    let opts = ContinuumOptions {
        speed_lo: common::speed_arg(1, c.speed_lo),
        speed_hi: common::speed_arg(2, c.speed_hi),
        ..c
    };
    let family = p.continuum(Some(opts))?;
    println!("{:>4} {:>8} {:>10} {:>9} {:>8}", "gait", "speed", "zeta*", "V-", "torque");
    for m in &family.members {
        let mark = if m.index == family.base_index { " base" } else { "" };
        println!(
            "{:>4} {:>8.4} {:>10.3} {:>9.3} {:>8.1}{mark}",
            m.index, m.speed, m.zeta_star, m.v_minus, m.margins.max_torque
        );
    }
    let (lo, hi) = family.speed_range();
    println!("{} gaits over {lo:.4}-{hi:.4} m/s, largest gap {:.4} m/s", family.len(), family.max_gap());
    Ok(())
}
