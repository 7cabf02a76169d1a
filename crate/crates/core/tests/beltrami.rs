use std::sync::OnceLock;

use transonic::beltrami::*;
use transonic::duct::{Duct, DuctConfig};
use transonic::potential::{fixed_point_solve, PotentialConfig, PotentialProblem};

fn rotational_duct() -> &'static Duct {
    static DUCT: OnceLock<Duct> = OnceLock::new();
    DUCT.get_or_init(|| Duct::build(&DuctConfig { modes: 20, ..Default::default() }).unwrap())
}

fn rotational(eps: f64) -> (BeltramiState, StreamlineReport, f64, f64) {
    let duct = rotational_duct();
    let pb = BeltramiProblem::new(duct, &BeltramiConfig { eps, ..Default::default() }).unwrap();
    let st = beltrami_fixed_point(&pb).unwrap();
    let lines = streamline_check(duct, &pb.fam, &st.v, &st.kappa, 50).unwrap();
    let surf = st.sonic_surface(duct).unwrap();
    let check = st.sonic_check(&pb, &surf).unwrap();
    (st, lines, surf.sup_xi, check)
}

fn base_run() -> &'static (BeltramiState, StreamlineReport, f64, f64) {
    static RUN: OnceLock<(BeltramiState, StreamlineReport, f64, f64)> = OnceLock::new();
    RUN.get_or_init(|| rotational(1e-3))
}

#[test]
fn zero_tangential_data_reproduce_the_irrotational_flow() {
    let duct = Duct::build(&DuctConfig { modes: 9, symmetric: true, ..Default::default() }).unwrap();
    let pot = PotentialProblem::new(&duct, &PotentialConfig { h0_amplitude: 0.0, tol: 1e-11, ..Default::default() }).unwrap();
    let sol = fixed_point_solve(&pot).unwrap();
    let cfg = BeltramiConfig { datum: TangentialDatum::default(), ..Default::default() };
    let pb = BeltramiProblem::new(&duct, &cfg).unwrap();
    let st = beltrami_fixed_point(&pb).unwrap();
    assert_eq!(st.residuals.max_kappa, 0.0);
    assert_eq!(st.pi.max_abs(), 0.0);
    let mut worst = 0.0f64;
    for c in 0..3 {
        for (a, b) in st.u[c].iter().flatten().zip(sol.u[c].iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-10, "velocity mismatch {worst:e}\n{}", st.iteration_log());
}

#[test]
fn rotational_flow_solves_the_steady_system() {
    let (st, lines, _, check) = base_run();
    let log = st.iteration_log();
    let tol = BeltramiConfig::default().tol;
    let r = &st.residuals;
    assert!(st.converged, "{log}");
    for rec in st.history.iter().skip(1) {
        assert!(rec.ratio.unwrap() <= 0.5, "{log}");
    }
    assert!(st.ball_max <= st.delta1, "{log}");
    assert!(r.alignment <= 10.0 * tol, "{log}");
    assert!(r.mass <= 10.0 * tol, "{log}");
    assert!(r.transport <= 10.0 * tol, "{log}");
    assert!(r.bernoulli <= 1e-9, "{log}");
    assert!(r.wall_slip <= 1e-8 && r.wall_dn_v1 <= 1e-8, "{log}");
    assert!(r.kappa_wall <= 1e-12 && r.pi_wall <= 1e-12 && r.pi_end_slope <= 1e-8, "{log}");
    assert!(r.div_vorticity <= 1e-9 && r.curl_grad_phi <= 1e-9, "{log}");
    assert!(r.max_vorticity > 1e-6, "{log}");
    assert!(lines.max_variation <= 1e-6, "{lines:?}");
    assert!(*check <= 1e-8);
}

#[test]
fn sonic_shift_is_linear_in_the_amplitude() {
    let (_, _, xi1, _) = base_run();
    let (_, _, xi2, _) = rotational(5e-4);
    let ratio = xi1 / xi2;
    assert!((ratio - 2.0).abs() <= 0.5, "sup xi {xi1:e} vs {xi2:e}");
}
