//! The parametric displacement generator and the fault-physics helpers.

use rominv::forward::{fault_strength, friction_coefficient, generate_dataset, ForwardParams, FrictionLaw};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = ForwardParams::default();
    let dataset = generate_dataset(&[100.0, 200.0, 300.0, 400.0], &params)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "q", "u(20 d)", "u(60 d)", "u(114 d)");
    for (rate, series) in &dataset {
        let v = series.values();
        println!("{:>6} {:>12.6} {:>12.6} {:>12.6}", rate.0, v[20], v[60], v[114]);
    }

    let law = FrictionLaw::default();
    println!("\nslip-weakening friction, d_c = {} m", law.d_c);
    for slip_mm in [0.0, 1.0, 2.5, 5.0, 8.0] {
        println!("  slip {slip_mm:>4} mm -> mu_f = {:.3}", friction_coefficient(slip_mm * 1e-3, &law));
    }

    let normal = [0.0, 1.0];
    for traction in [[0.3, -1.0], [0.6, -1.0], [0.2, 0.5]] {
        let mu = friction_coefficient(0.0, &law);
        let s = fault_strength(traction, normal, &law, mu)?;
        println!(
            "traction {:?}: shear {:.3} Pa, strength {:.3} Pa, slipping: {}",
            traction,
            s.tau,
            s.tau_f,
            s.is_slipping()
        );
    }
    Ok(())
}
