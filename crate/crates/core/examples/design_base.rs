//! Designs and certifies the base gait, then prints its orbit summary.
//!
//! ```text
//! cargo run --release --example design_base -- artifacts
//! ```

mod common;

fn main() {
    env_logger::init();
    common::exit_on_error(run());
}

fn run() -> hzd_gaits::Result<()> {
    let p = common::pipeline()?;
    let base = p.design_base()?;
    let r = &base.record;
    println!("speed            {:.4} m/s", r.speed);
    println!("period           {:.4} s, step length {:.4} m", r.period, r.step_length);
    println!("delta_z^2        {:.6}", r.delta_sq);
    println!("zeta*            {:.3}  (K/delta^2 = {:.3})", r.zeta_star, r.k_max / r.delta_sq);
    println!("spectral radius  {:.6}", r.spectrum.spectral_radius);
    println!("|P(x*) - x*|     {:.2e}", r.fixed_point_residual);
    println!(
        "margins          torque {:.1} N·m, F_n >= {:.1} N, |F_t|/F_n <= {:.3}",
        r.margins.max_torque, r.margins.min_normal_force, r.margins.max_friction_ratio
    );
    println!("wrote {}", p.path(hzd_gaits::pipeline::BASE_GAIT_FILE).display());
    Ok(())
}
