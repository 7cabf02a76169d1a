//! Run configuration, solve reports and the subcommands of the `transonic`
//! binary. Everything here is deterministic for a fixed configuration and a
//! single worker thread; timings are only recorded on request.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::beltrami::{self, BeltramiConfig, BeltramiProblem};
use crate::duct::{Duct, DuctConfig};
use crate::error::{Error, Result};
use crate::mixed::{self, MixedCoefficients};
use crate::potential::{self, PotentialConfig, PotentialProblem, SonicSurface};
use crate::verify::{self, VerifyReport};
use crate::xsection::SpectralField;

/// Everything one invocation needs. Sections that are absent fall back to
/// their defaults when a subcommand needs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub duct: DuctConfig,
    /// Nodes of the standalone conservation check in `verify`.
    pub background_nodes: usize,
    pub potential: Option<PotentialConfig>,
    pub beltrami: Option<BeltramiConfig>,
    /// Output directory; `--out` takes precedence.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { run_id: "run".into(), duct: DuctConfig::default(), background_nodes: 10_000, potential: None, beltrami: None, out_dir: None }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config does not parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Build the duct and every configured problem once, so invalid input
    /// fails before any solve starts.
    pub fn validate(&self) -> Result<Duct> {
        if self.background_nodes < 3 {
            return Err(Error::Config("background_nodes must be at least 3".into()));
        }
        let duct = Duct::build(&self.duct)?;
        if let Some(p) = &self.potential {
            PotentialProblem::new(&duct, p)?;
        }
        if let Some(b) = &self.beltrami {
            BeltramiProblem::new(&duct, b)?;
        }
        Ok(duct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    /// Norm of the successive difference.
    pub diff: f64,
    pub ratio: Option<f64>,
    /// Norm of the iterate checked against the ball radius.
    pub norm: f64,
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SonicSummary {
    pub sup_xi: f64,
    pub c1_norm: f64,
    pub min_mach2_increment: f64,
    /// `max ||M|^2 - 1|` on the located surface.
    pub check: f64,
}

impl SonicSummary {
    fn new(surf: &SonicSurface, check: f64) -> Self {
        SonicSummary { sup_xi: surf.sup_xi, c1_norm: surf.c1_norm, min_mach2_increment: surf.min_increment, check }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub run_id: String,
    pub subcommand: String,
    /// Effective configuration.
    pub config: RunConfig,
    pub converged: Option<bool>,
    pub iterations: Vec<IterationRow>,
    pub residuals: BTreeMap<String, f64>,
    /// Admissibility margins and multiplier-identity constants.
    pub margins: BTreeMap<String, f64>,
    pub sonic: Option<SonicSummary>,
    /// Wall-clock seconds, present only when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl SolveReport {
    fn new(cfg: &RunConfig, sub: &str) -> Self {
        SolveReport {
            run_id: cfg.run_id.clone(),
            subcommand: sub.into(),
            config: cfg.clone(),
            converged: None,
            iterations: Vec::new(),
            residuals: BTreeMap::new(),
            margins: BTreeMap::new(),
            sonic: None,
            timings: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("report does not parse: {e}")))
    }

    /// Human-readable rendering.
    pub fn render(&self) -> String {
        let mut s = format!("# {} ({})\n\n", self.run_id, self.subcommand);
        if let Some(c) = self.converged {
            s.push_str(&format!("converged: {c}\n\n"));
        }
        if !self.iterations.is_empty() {
            s.push_str("| k | diff | ratio | norm |\n|---|---|---|---|\n");
            for r in &self.iterations {
                let ratio = r.ratio.map_or("-".to_string(), |v| format!("{v:.3e}"));
                s.push_str(&format!("| {} | {:.3e} | {} | {:.3e} |\n", r.k, r.diff, ratio, r.norm));
            }
            s.push('\n');
        }
        for (title, map) in [("residuals", &self.residuals), ("margins", &self.margins)] {
            if !map.is_empty() {
                s.push_str(&format!("## {title}\n\n"));
                for (k, v) in map {
                    s.push_str(&format!("- {k}: {v:.6e}\n"));
                }
                s.push('\n');
            }
        }
        if let Some(z) = &self.sonic {
            s.push_str(&format!(
                "## sonic surface\n\n- sup_xi: {:.6e}\n- c1_norm: {:.6e}\n- min_mach2_increment: {:.6e}\n- check: {:.6e}\n\n",
                z.sup_xi, z.c1_norm, z.min_mach2_increment, z.check
            ));
        }
        if let Some(t) = &self.timings {
            s.push_str("## timings (s)\n\n");
            for (k, v) in t {
                s.push_str(&format!("- {k}: {v:.3}\n"));
            }
        }
        s
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub timings: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn admissibility_margins(duct: &Duct, m: &mut BTreeMap<String, f64>) {
    let a = &duct.adm;
    m.insert("kappa_star".into(), a.kappa_star);
    m.insert("margin_sign".into(), a.margin_sign);
    m.insert("margin_multiplier".into(), a.margin_multiplier);
    m.insert("margin_sign_ext".into(), a.margin_sign_ext);
    m.insert("margin_multiplier_ext".into(), a.margin_multiplier_ext);
    m.insert("k0".into(), a.k0);
    m.insert("d0".into(), a.d0);
}

fn energy_margins(duct: &Duct, psi: &SpectralField, m: &mut BTreeMap<String, f64>) {
    let coeffs = MixedCoefficients::background(&duct.ext);
    let e = mixed::energy_diagnostics(&duct.disc, &coeffs, psi, duct.ext.d0);
    m.insert("energy_constant".into(), e.constant);
    m.insert("energy_coercivity_axial".into(), e.coercivity_axial);
    m.insert("energy_coercivity_transverse".into(), e.coercivity_transverse);
    m.insert("energy_identity_imbalance".into(), e.relative_imbalance);
}

/// Legacy-VTK structured points: `x1` fastest, then `x2`, then `x3`.
pub fn write_vtk<W: Write>(duct: &Duct, mut w: W, title: &str, scalars: &[(&str, &[Vec<f64>])], vectors: &[(&str, &[Vec<Vec<f64>>; 3])]) -> std::io::Result<()> {
    let g = &duct.disc.grid;
    let cs = &duct.disc.cs;
    let no = g.omega_nodes();
    writeln!(w, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {no} {} {}", cs.n2, cs.n3)?;
    writeln!(w, "ORIGIN {:.10e} {:.10e} {:.10e}", g.l0, cs.x2[0], cs.x3[0])?;
    writeln!(w, "SPACING {:.10e} {:.10e} {:.10e}", g.h, cs.x2[1] - cs.x2[0], cs.x3[1] - cs.x3[0])?;
    writeln!(w, "POINT_DATA {}", no * cs.n2 * cs.n3)?;
    let order = |f: &mut dyn FnMut(usize, usize) -> std::io::Result<()>| -> std::io::Result<()> {
        for i3 in 0..cs.n3 {
            for i2 in 0..cs.n2 {
                for i in 0..no {
                    f(i, i2 * cs.n3 + i3)?;
                }
            }
        }
        Ok(())
    };
    for (name, f) in scalars {
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
        order(&mut |i, p| writeln!(w, "{:.12e}", f[i][p]))?;
    }
    for (name, f) in vectors {
        writeln!(w, "VECTORS {name} double")?;
        order(&mut |i, p| writeln!(w, "{:.12e} {:.12e} {:.12e}", f[0][i][p], f[1][i][p], f[2][i][p]))?;
    }
    Ok(())
}

fn finish_report(opts: &RunOptions, mut report: SolveReport, timings: BTreeMap<String, f64>) -> Result<SolveReport> {
    if opts.timings {
        report.timings = Some(timings);
    }
    write_text(&opts.out.join("report.json"), &(report.to_json() + "\n"))?;
    Ok(report)
}

/// Background profile and admissibility margins.
pub fn run_background(cfg: &RunConfig, opts: &RunOptions) -> Result<SolveReport> {
    let t = Instant::now();
    let duct = cfg.validate()?;
    fs::create_dir_all(&opts.out)?;
    duct.bg.write_csv(create(&opts.out.join("background.csv"))?)?;
    let mut report = SolveReport::new(cfg, "background");
    let i0 = duct.disc.grid.i0;
    let (rho_s, u_s) = duct.gas.sonic_state();
    report.residuals.insert("mass_flux_defect".into(), duct.bg.mass_flux_defect());
    report.residuals.insert("bernoulli_defect".into(), duct.bg.bernoulli_defect());
    report.residuals.insert("sonic_u_error".into(), (duct.bg.pts[i0].u.value() - u_s).abs());
    report.residuals.insert("sonic_rho_error".into(), (duct.bg.pts[i0].rho.value() - rho_s).abs());
    admissibility_margins(&duct, &mut report.margins);
    finish_report(opts, report, BTreeMap::from([("total".to_string(), t.elapsed().as_secs_f64())]))
}

/// Irrotational fixed point.
pub fn run_potential(cfg: &RunConfig, opts: &RunOptions) -> Result<SolveReport> {
    let t = Instant::now();
    let duct = cfg.validate()?;
    let pcfg = cfg.potential.clone().unwrap_or_default();
    let pb = PotentialProblem::new(&duct, &pcfg)?;
    let sol = potential::fixed_point_solve(&pb)?;
    let solve_time = t.elapsed().as_secs_f64();
    let surf = potential::sonic_surface(&duct, &sol.mach2)?;
    let check = potential::sonic_check(&pb, &sol, &surf)?;
    fs::create_dir_all(&opts.out)?;
    sol.write_fields_csv(&duct, create(&opts.out.join("fields.csv"))?)?;
    surf.write_csv(&duct, create(&opts.out.join("sonic_surface.csv"))?)?;
    write_vtk(&duct, create(&opts.out.join("fields.vtk"))?, &cfg.run_id, &[("rho", &sol.rho), ("mach2", &sol.mach2)], &[("velocity", &sol.u)])?;
    let mut report = SolveReport::new(cfg, "solve-potential");
    report.converged = Some(sol.converged);
    for r in &sol.history {
        let extra = BTreeMap::from([
            ("f_norm".to_string(), r.f_norm),
            ("quad_constant".to_string(), r.quad_constant),
            ("entrance_wall_compat".to_string(), r.entrance_wall_compat),
            ("sigma_floor".to_string(), r.sigma_floor),
        ]);
        report.iterations.push(IterationRow { k: r.k, diff: r.diff_h1, ratio: r.ratio, norm: r.h4, extra });
    }
    for (k, v) in [
        ("equation_interior", sol.residual),
        ("equation_all", sol.residual_all),
        ("bernoulli", sol.bernoulli_defect),
        ("wall_normal", sol.wall_normal_residual),
        ("entrance", sol.entrance_residual),
        ("ball_max_h4", sol.ball_max),
        ("delta0", sol.delta0),
    ] {
        report.residuals.insert(k.into(), v);
    }
    admissibility_margins(&duct, &mut report.margins);
    energy_margins(&duct, &sol.psi, &mut report.margins);
    report.sonic = Some(SonicSummary::new(&surf, check));
    write_iterations(&opts.out, &report)?;
    finish_report(opts, report, BTreeMap::from([("solve".to_string(), solve_time), ("total".to_string(), t.elapsed().as_secs_f64())]))
}

/// Rotational fixed point with `kappa` transported along the flow.
pub fn run_beltrami(cfg: &RunConfig, opts: &RunOptions) -> Result<SolveReport> {
    let t = Instant::now();
    let duct = cfg.validate()?;
    let bcfg = cfg.beltrami.clone().unwrap_or_default();
    let pb = BeltramiProblem::new(&duct, &bcfg)?;
    let st = beltrami::beltrami_fixed_point(&pb)?;
    let solve_time = t.elapsed().as_secs_f64();
    let surf = st.sonic_surface(&duct)?;
    let check = st.sonic_check(&pb, &surf)?;
    let lines = beltrami::streamline_check(&duct, &pb.fam, &st.v, &st.kappa, 50)?;
    fs::create_dir_all(&opts.out)?;
    st.write_fields_csv(&duct, &pb.fam, create(&opts.out.join("fields.csv"))?)?;
    surf.write_csv(&duct, create(&opts.out.join("sonic_surface.csv"))?)?;
    write_vtk(
        &duct,
        create(&opts.out.join("fields.vtk"))?,
        &cfg.run_id,
        &[("rho", &st.rho), ("mach2", &st.mach2), ("kappa", &st.kappa)],
        &[("velocity", &st.u), ("vorticity", &st.vorticity)],
    )?;
    let mut report = SolveReport::new(cfg, "solve-beltrami");
    report.converged = Some(st.converged);
    for r in &st.history {
        let extra = BTreeMap::from([
            ("h4_upstream".to_string(), r.h4_upstream),
            ("kappa_max".to_string(), r.kappa_max),
            ("pi_max".to_string(), r.pi_max),
            ("stream_mismatch".to_string(), r.stream_mismatch),
            ("source_divergence".to_string(), r.source_divergence),
        ]);
        report.iterations.push(IterationRow { k: r.k, diff: r.diff, ratio: r.ratio, norm: r.h3, extra });
    }
    if let serde_json::Value::Object(map) = serde_json::to_value(&st.residuals).expect("plain numeric report") {
        for (k, v) in map {
            report.residuals.insert(k, v.as_f64().unwrap_or(f64::NAN));
        }
    }
    report.residuals.insert("streamline_kappa_variation".into(), lines.max_variation);
    report.residuals.insert("ball_max_h3".into(), st.ball_max);
    report.residuals.insert("h4_upstream_max".into(), st.h4_upstream_max);
    report.residuals.insert("delta1".into(), st.delta1);
    admissibility_margins(&duct, &mut report.margins);
    energy_margins(&duct, &st.psi, &mut report.margins);
    report.sonic = Some(SonicSummary::new(&surf, check));
    write_iterations(&opts.out, &report)?;
    finish_report(opts, report, BTreeMap::from([("solve".to_string(), solve_time), ("total".to_string(), t.elapsed().as_secs_f64())]))
}

fn write_iterations(out: &Path, report: &SolveReport) -> Result<()> {
    let mut w = create(&out.join("iterations.csv"))?;
    let keys: Vec<String> = report.iterations.first().map(|r| r.extra.keys().cloned().collect()).unwrap_or_default();
    write!(w, "k,diff,ratio,norm")?;
    for k in &keys {
        write!(w, ",{k}")?;
    }
    writeln!(w)?;
    for r in &report.iterations {
        write!(w, "{},{:.16e},{},{:.16e}", r.k, r.diff, r.ratio.map_or(String::new(), |v| format!("{v:.16e}")), r.norm)?;
        for k in &keys {
            write!(w, ",{:.16e}", r.extra[k])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// The property suite for this configuration. The irrotational and
/// rotational parts run only when their sections are present.
pub fn run_verify(cfg: &RunConfig, opts: &RunOptions) -> Result<VerifyReport> {
    let duct = cfg.validate()?;
    let mut checks = verify::background_suite(&cfg.duct, cfg.background_nodes);
    checks.extend(verify::admissibility_suite("config", &cfg.duct));
    checks.extend(verify::extension_suite(cfg.duct.l1));
    checks.extend(verify::linear_suite(&cfg.duct));
    if let Some(p) = &cfg.potential {
        checks.extend(verify::potential_suite(&duct, p));
    }
    if let Some(b) = &cfg.beltrami {
        checks.extend(verify::beltrami_suite(&duct, b));
        checks.extend(verify::divcurl_suite(&duct));
    }
    let report = VerifyReport { checks };
    fs::create_dir_all(&opts.out)?;
    write_text(&opts.out.join("verify.txt"), &report.render())?;
    write_text(&opts.out.join("verify.json"), &(serde_json::to_string_pretty(&report).expect("report serialises") + "\n"))?;
    Ok(report)
}

/// Re-render a saved report as markdown next to it.
pub fn run_report(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let report = SolveReport::from_json(&text)?;
    let md = report.render();
    write_text(&path.with_extension("md"), &md)?;
    Ok(md)
}

/// Exit status for a failed run: 2 for bad input, 3 for solver failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

/// One-line JSON error record.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "status": "error", "exit_code": exit_code(e), "kind": e.kind(), "message": e.to_string() }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let cfg = RunConfig { potential: Some(PotentialConfig::default()), ..Default::default() };
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let err = RunConfig::from_json(r#"{"duct": {"n1": 1680, "bogus": 1}}"#).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn indivisible_grid_is_a_validation_error() {
        let cfg = RunConfig { duct: DuctConfig { n1: 1001, ..Default::default() }, ..Default::default() };
        let e = cfg.validate().unwrap_err();
        assert_eq!(exit_code(&e), 2, "{e}");
        let rec: serde_json::Value = serde_json::from_str(&error_record(&e)).unwrap();
        assert_eq!(rec["exit_code"], 2);
    }

    #[test]
    fn report_renders_every_section() {
        let mut r = SolveReport::new(&RunConfig::default(), "solve-potential");
        r.converged = Some(true);
        r.iterations.push(IterationRow { k: 1, diff: 1e-3, ratio: None, norm: 2e-2, extra: BTreeMap::new() });
        r.residuals.insert("bernoulli".into(), 1e-16);
        let back = SolveReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let md = back.render();
        assert!(md.contains("| 1 | 1.000e-3 | - | 2.000e-2 |") && md.contains("- bernoulli: 1.000000e-16"), "{md}");
    }
}
