//! Acceptance suite: one PASS/FAIL line per criterion, with the individual
//! checks listed underneath. Configurations and tolerances are pinned here
//! or in the shipped `configs/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use transonic::cli::RunConfig;
use transonic::duct::{Duct, DuctConfig};
use transonic::verify::{self, Check, Op};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped(name: &str) -> RunConfig {
    RunConfig::load(&configs_dir().join(name)).expect("shipped config loads")
}

fn runtime(criterion: u8, start: Instant, limit: f64) -> Check {
    Check::new(criterion, "runtime_seconds", start.elapsed().as_secs_f64(), Op::Lt, limit)
}

fn duct_checks(criterion: u8, duct: &std::result::Result<Duct, transonic::Error>) -> Option<Vec<Check>> {
    duct.as_ref().err().map(|e| vec![Check::failed(criterion, "duct.build", e)])
}

fn criterion_1() -> Vec<Check> {
    let t = Instant::now();
    let mut out = verify::background_suite(&shipped("background.json").duct, 10_000);
    out.push(runtime(1, t, 1.0));
    out
}

fn criterion_2() -> Vec<Check> {
    let mut out = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(configs_dir()).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "json")).collect();
    names.sort();
    for p in names {
        let t = Instant::now();
        let name = p.file_stem().unwrap().to_string_lossy().into_owned();
        let cfg = RunConfig::load(&p).expect("shipped config loads");
        out.extend(verify::admissibility_suite(&name, &cfg.duct));
        let mut r = runtime(2, t, 1.0);
        r.name = format!("{name}.runtime_seconds");
        out.push(r);
    }
    out
}

fn criterion_3() -> Vec<Check> {
    verify::extension_suite(0.5)
}

fn criterion_4() -> Vec<Check> {
    let t = Instant::now();
    let mut out = verify::linear_suite(&DuctConfig { n1: 1680, modes: 16, ..Default::default() });
    out.push(runtime(4, t, 60.0));
    out
}

fn criterion_5() -> Vec<Check> {
    let t = Instant::now();
    let cfg = shipped("potential.json");
    let duct = Duct::build(&cfg.duct);
    let mut out = duct_checks(5, &duct).unwrap_or_else(|| verify::potential_suite(duct.as_ref().unwrap(), cfg.potential.as_ref().expect("potential section")));
    out.push(runtime(5, t, 300.0));
    out
}

fn criterion_6_7() -> (Vec<Check>, Vec<Check>) {
    let cfg = shipped("beltrami.json");
    let t = Instant::now();
    let duct = Duct::build(&cfg.duct);
    if let Some(fail) = duct_checks(6, &duct) {
        return (fail.clone(), fail.into_iter().map(|mut c| {
            c.criterion = 7;
            c
        }).collect());
    }
    let duct = duct.unwrap();
    let mut six = verify::beltrami_suite(&duct, cfg.beltrami.as_ref().expect("beltrami section"));
    six.push(runtime(6, t, 600.0));
    (six, verify::divcurl_suite(&duct))
}

fn criterion_8() -> Vec<Check> {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("potential.json");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let st = Command::new(env!("CARGO_BIN_EXE_transonic"))
            .args(["verify", "--threads", "1", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&dir)
            .output()
            .expect("binary runs");
        outputs.push((st.status.code(), st.stdout, dir));
    }
    let mut out = vec![Check::new(8, "verify_exit_status", outputs[0].0.unwrap_or(-1) as f64, Op::Le, 0.0)];
    for f in ["verify.txt", "verify.json"] {
        let (a, b) = (fs::read(outputs[0].2.join(f)).ok(), fs::read(outputs[1].2.join(f)).ok());
        let differ = a.is_none() || a != b;
        out.push(Check::new(8, format!("{f}.differs"), differ as u8 as f64, Op::Le, 0.0));
    }
    out.push(Check::new(8, "stdout.differs", (outputs[0].1 != outputs[1].1) as u8 as f64, Op::Le, 0.0));
    out
}

fn summarise(criterion: u8, title: &str, checks: &[Check]) -> bool {
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} criterion {criterion}: {title} ({} checks, {failed} failed)", if pass { "PASS" } else { "FAIL" }, checks.len());
    for c in checks {
        println!("    {}", c.line());
    }
    pass
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= summarise(1, "background exactness", &criterion_1());
    ok &= summarise(2, "admissibility margins on shipped configs", &criterion_2());
    ok &= summarise(3, "extension operator", &criterion_3());
    ok &= summarise(4, "linear mixed-type solver", &criterion_4());
    ok &= summarise(5, "irrotational fixed point", &criterion_5());
    let (six, seven) = criterion_6_7();
    ok &= summarise(6, "Beltrami fixed point", &six);
    ok &= summarise(7, "div-curl solver", &seven);
    ok &= summarise(8, "deterministic verify report", &criterion_8());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
