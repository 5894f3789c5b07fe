//! Checks the family invariants, the uniform boundedness condition and a
//! batch of random switching signals. The signal count defaults to a quick
//! 10 x 200; the configuration file can raise it.
//!
//! ```text
//! cargo run --release --example certify_family -- artifacts
//! ```

mod common;

fn main() {
    env_logger::init();
    common::exit_on_error(run());
}

fn run() -> hzd_gaits::Result<()> {
    let mut p = common::pipeline()?;
    if std::env::var_os(hzd_gaits::config::CONFIG_ENV).is_none() {
        p.config.analyze.random_signals = 10;
        p.config.analyze.signal_steps = 200;
    }
    let a = p.analyze()?;
    let f = &a.family;
    println!("gaits {} over {:.4}-{:.4} m/s", f.gaits, f.speed_min, f.speed_max);
    println!(
        "delta^2 spread {:.2e}, zeta* closure {:.2e}, affinity {:.2e}",
        f.delta_sq_spread, f.zeta_star_closure, f.affinity_residual
    );
    println!("sign property {}, ordering property {}", f.sign_property, f.ordering_property);
    let b = &a.boundedness;
    println!(
        "boundedness {}: zeta*_lb {:.2} vs K/delta^2 {:.2} (margin {:.2})",
        if b.pass { "passes" } else { "fails" },
        b.zeta_lb,
        b.threshold(),
        b.margin
    );
    if let Some(r) = &a.random_switching {
        println!(
            "{} random signals x {} steps: zeta in [{:.2}, {:.2}], excursion {:.1e}, replay residual {:.1e}",
            r.signals, r.steps, r.zeta_min, r.zeta_max, r.max_excursion, r.max_replay_residual
        );
    }
    Ok(())
}
