use qbsde::bsde::*;
use qbsde::generator::{builtin, step, DominatingParams, GeneratorSpec, PieceKind};
use qbsde::stochastic::sample_brownian;
use qbsde::TimeGrid;
use std::time::Instant;

fn sin_envelope() -> GeneratorSpec {
    GeneratorSpec::supported(
        0.0,
        std::f64::consts::PI,
        PieceKind::Sin { amplitude: 1.0, frequency: 1.0, phase: 0.0 },
        0.0,
    )
    .unwrap()
}

fn main() {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let e = sample_brownian(&grid, 20000, 47).unwrap();
    let term = TerminalCondition::of_brownian(PsiFn::Abs);
    let cfg = SolverConfig::default();

    // H = 0
    let t0 = Instant::now();
    let params = DominatingParams::new(0.5, 0.1, 0.0, step(1.0).unwrap()).unwrap();
    let (sol, pair) = solve_dominated(&ZeroDriver, &params, &term, &e, None, &cfg).unwrap();
    let plain = solve_zero_generator(&term, &e, None, Method::Regression, &cfg).unwrap();
    let (b, a) = pair.violation(&sol);
    println!("H=0 : y0 {:.4} plain {:.4} viol ({:.2e},{:.2e})  [{:?}]", sol.y0(), plain.y0(), b, a, t0.elapsed());

    // H = H1 (sin cutoff)
    let t0 = Instant::now();
    let params1 = DominatingParams::new(0.3, 0.1, 0.0, sin_envelope()).unwrap();
    let h1 = QuadraticGenDriver::new(builtin("h1").unwrap(), "h1");
    let (sol1, pair1) = solve_dominated(&h1, &params1, &term, &e, None, &cfg).unwrap();
    let (b1, a1) = pair1.violation(&sol1);
    println!("H=H1: y0 {:.4} viol ({:.2e},{:.2e})  radius {:.2}  [{:?}]", sol1.y0(), b1, a1, pair1.truncation_radius, t0.elapsed());

    // H = g itself
    let t0 = Instant::now();
    let params_g = DominatingParams::new(0.3, 0.1, 0.0, step(1.0).unwrap()).unwrap();
    let g_drv = DominatingDriver::new(params_g.clone()).unwrap();
    let (sol_g, pair_g) = solve_dominated(&g_drv, &params_g, &term, &e, None, &cfg).unwrap();
    let (bg, ag) = pair_g.violation(&sol_g);
    // cross-check vs solve_qbsde_abc (regression route)
    let abc = solve_qbsde_abc(&params_g, DriverSign::Plus, &term, &e, None, &cfg).unwrap();
    println!("H=g : y0 {:.4} abc y0 {:.4} viol ({:.2e},{:.2e})  upper-diff y0 {:.2e}  [{:?}]",
        sol_g.y0(), abc.y0(), bg, ag, (sol_g.y0() - pair_g.upper.y0()).abs(), t0.elapsed());

    // negative control: H = 3 g violates the domination
    let cfg_nc = SolverConfig { sandwich_tol: None, ..Default::default() };
    let scaled = ScaledDriver::new(DominatingDriver::new(params_g.clone()).unwrap(), 3.0);
    let (sol_nc, pair_nc) = solve_dominated(&scaled, &params_g, &term, &e, None, &cfg_nc).unwrap();
    let (bn, an) = pair_nc.violation(&sol_nc);
    println!("H=3g: viol ({:.2e},{:.2e}) -- must exceed 1e-6", bn, an);
}
