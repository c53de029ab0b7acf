//! End-to-end acceptance checks. Runs as a plain binary so that every criterion prints
//! exactly one PASS/FAIL line in the ordinary `cargo test` output.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use common::oracle;
use common::*;
use germglue::atlas::{
    audit_cover, audit_transitivity, compute_overlaps, enforce_triple_domains, failed_certificates, glue,
    glue_chartwise_maps, shrink_tubes, validate_germ_data, AtlasParams, ChartMap, GluedAtlas, Nerve,
};
use germglue::coeff::{rat, ratio, Coeff, Gaussian};
use germglue::error::Error;
use germglue::geometry::refine_cover;
use germglue::jet::Jet;
use germglue::matrix::JetMatrix;
use germglue::polymap::{compose, map_inverse, PolyMap};
use germglue::sheaf::{glue_sheaf, glue_sheaf_morphism, validate_sheaf_cocycle, SheafData};
use germglue::tep::{check_gc, check_ic, validate_tep_flatness, validate_tep_pairing, TepData, TepOrders};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const JET_CASES: usize = 200;
const JET_VARS: usize = 3;
const JET_ORDER: u32 = 6;
const JET_SEED: u64 = 0x6a65_7473;
const JET_BUDGET: Duration = Duration::from_secs(5);
const INVERSE_ORDER: u32 = 8;
const SHEAR_ORDER: u32 = 6;
const AUDIT_POINTS: usize = 1000;
const AUDIT_SEED: u64 = 4;
const SHEAR_BUDGET: Duration = Duration::from_secs(10);
const CHAINS: usize = 1000;
const CHAIN_SEED: u64 = 6;
const SHEAF_ORDER: u32 = 4;
const TEP_ORDERS: TepOrders = TepOrders { t: 4, z: 2 };
const CLI_SEED: &str = "17";
/// Criteria known to fail. The swap fixture's `B` carries a scalar `z Id` term, which is not
/// skew for `P` under `s1(t, -z)^T P s2`, so the z-pairing identity leaves `-2 z P` however
/// the rest of the structure is chosen. Still reported as FAIL; a pass here is an error.
const EXPECTED_FAILURES: &[u32] = &[8];

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_coeff(rng: &mut ChaCha8Rng) -> Coeff {
    let d = rng.gen_range(1..=6);
    Coeff::from_gaussian(Gaussian::new(
        ratio(rng.gen_range(-9..=9), d),
        ratio(rng.gen_range(-9..=9), d),
    ))
}

fn random_jet(rng: &mut ChaCha8Rng, terms: usize, min_degree: u32) -> Jet {
    let mut out = Vec::new();
    while out.len() < terms {
        let e: Vec<u32> = (0..JET_VARS).map(|_| rng.gen_range(0..=JET_ORDER)).collect();
        let deg: u32 = e.iter().sum();
        if deg >= min_degree && deg <= JET_ORDER {
            out.push((e, random_coeff(rng)));
        }
    }
    Jet::from_terms(JET_VARS, JET_ORDER, out).unwrap()
}

fn jet_kernels() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(JET_SEED);
    let mut spent = Duration::ZERO;
    for case in 0..JET_CASES {
        let a = random_jet(&mut rng, 12, 0);
        let b = random_jet(&mut rng, 12, 0);
        let inner: Vec<Jet> = (0..JET_VARS).map(|_| random_jet(&mut rng, 3, 1)).collect();
        let g = PolyMap::new(JET_VARS, inner.clone()).unwrap();

        let t = Instant::now();
        let product = &a * &b;
        let composite = compose(&a, &g).unwrap();
        spent += t.elapsed();

        let want_product = oracle::mul(&oracle::from_jet(&a), &oracle::from_jet(&b), JET_ORDER);
        ensure(
            oracle::from_jet(&product) == want_product,
            format!("product differs in case {case}"),
        )?;
        let inner_series: Vec<_> = inner.iter().map(oracle::from_jet).collect();
        let want_composite = oracle::substitute(&oracle::from_jet(&a), &inner_series, JET_VARS, JET_ORDER);
        ensure(
            oracle::from_jet(&composite) == want_composite,
            format!("composition differs in case {case}"),
        )?;
    }
    ensure(spent < JET_BUDGET, format!("kernels took {spent:?}"))?;
    Ok(format!(
        "{JET_CASES} products and compositions exact, kernel time {spent:.2?}"
    ))
}

fn binomial(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// Lagrange inversion of `x + x^2`: `[w^n] g = (1/n) [x^{n-1}] (1 + x)^{-n} = (-1)^{n-1} C(2n-2, n-1) / n`.
fn lagrange_coefficient(n: u64) -> Coeff {
    let magnitude = binomial(2 * n - 2, n - 1) / BigInt::from(n);
    let signed = if n % 2 == 1 { magnitude } else { -magnitude };
    Coeff::from_rational(germglue::coeff::Rational::from_integer(signed))
}

fn formal_inversion() -> Check {
    let f = Jet::from_terms(1, INVERSE_ORDER, [(vec![1], Coeff::one()), (vec![2], Coeff::one())]).unwrap();
    let g = map_inverse(&PolyMap::new(1, vec![f]).unwrap(), 0.0).map_err(|e| e.to_string())?;
    let got: Vec<Coeff> = (1..=INVERSE_ORDER).map(|k| g.component(0).coeff(&[k])).collect();
    let want: Vec<Coeff> = (1..=INVERSE_ORDER as u64).map(lagrange_coefficient).collect();
    ensure(got == want, format!("got {got:?}"))?;
    let shown: Vec<String> = got.iter().map(|c| c.to_string()).collect();
    Ok(format!("coefficients ({})", shown.join(", ")))
}

fn product_gluing() -> Check {
    let input = identity_triple(4);
    let atlas = parse(&input);
    let out = glue(&atlas, &AtlasParams::default()).map_err(|e| e.to_string())?;
    let id = PolyMap::identity(2, 4);
    for t in &out.atlas.transitions {
        let phi = PolyMap::from_doc(&t.phi, 2, 4).unwrap();
        ensure(phi == id, format!("transition ({}, {}) is not the identity", t.i, t.j))?;
    }
    ensure(out.atlas.certificates.hausdorff, "Hausdorff certificate false")?;
    let input_cover: Vec<_> = atlas.charts.iter().map(|c| (c.id.clone(), c.w.clone())).collect();
    let zs = out.atlas.zero_section_nerve();
    ensure(zs == Nerve::of(&input_cover), format!("zero-section nerve {zs:?}"))?;
    Ok(format!(
        "{} identity transitions, Hausdorff, nerve {} edges / {} triangles",
        out.atlas.transitions.len(),
        zs.edges.len(),
        zs.triangles.len()
    ))
}

fn nontrivial_gluing() -> Check {
    let start = Instant::now();
    let atlas = parse(&shear_pair(SHEAR_ORDER));
    validate_germ_data(&atlas).map_err(|e| e.to_string())?;
    let inverse = atlas.phi(1, 0).ok_or("no inverse transition")?;
    ensure(
        inverse == &shear_inverse(SHEAR_ORDER),
        "filled-in inverse differs from the series inverse",
    )?;
    let params = AtlasParams::default();
    let ws: Vec<_> = atlas.charts.iter().map(|c| c.w.clone()).collect();
    let covers = refine_cover(&ws, &atlas.samples, &params.fractions).map_err(|e| e.to_string())?;
    let overlaps = compute_overlaps(&atlas, &covers, &params).map_err(|e| e.to_string())?;
    let cover = shrink_tubes(&atlas, &covers, &overlaps, &params).map_err(|e| e.to_string())?;
    let cover = enforce_triple_domains(&atlas, cover).map_err(|e| e.to_string())?;
    ensure(failed_certificates(&cover).is_empty(), "a certificate failed")?;
    let audit = audit_cover(&atlas, &cover, AUDIT_POINTS, AUDIT_SEED);
    for line in &audit.lines {
        ensure(
            line.tested >= AUDIT_POINTS,
            format!("{} tested only {} points", line.check, line.tested),
        )?;
        ensure(
            line.violations == 0,
            format!("{}: {:?}", line.check, line.first_violation),
        )?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < SHEAR_BUDGET, format!("took {elapsed:?}"))?;
    let ns: Vec<String> = cover.charts.iter().map(|c| format!("n_{}={}", c.id, c.n)).collect();
    Ok(format!(
        "{}, {} checks x {AUDIT_POINTS} samples, 0 violations, {elapsed:.2?}",
        ns.join(" "),
        audit.lines.len()
    ))
}

fn cocycle_detection() -> Check {
    let err = validate_germ_data(&parse(&perturbed_triple(4)))
        .err()
        .ok_or("perturbation accepted")?;
    let v = err
        .violations()
        .iter()
        .find(|v| v.check == "cocycle" && v.charts == ["1", "2", "3"])
        .ok_or_else(|| format!("no violation naming (1, 2, 3): {err}"))?;
    ensure(
        v.exponents.as_deref() == Some(&[0, 2][..]),
        format!("exponent {:?}", v.exponents),
    )?;
    ensure(err.exit_code() == 2, "wrong exit class")?;
    Ok(format!("{v}"))
}

fn transitivity() -> Check {
    let atlas = parse(&cocycle_triple(6));
    let out = glue(&atlas, &AtlasParams::default()).map_err(|e| e.to_string())?;
    let audit = audit_transitivity(&atlas, &out.cover, CHAINS, CHAIN_SEED);
    ensure(audit.chains == CHAINS, format!("only {} chains sampled", audit.chains))?;
    ensure(
        audit.membership_failures == 0,
        format!("{} chains left Q_ik", audit.membership_failures),
    )?;
    ensure(
        audit.exact_zero == CHAINS,
        format!("max residual {}", audit.max_residual),
    )?;
    Ok(format!("{CHAINS} chains, residual exactly 0"))
}

fn sheaf_gluing() -> Check {
    let k = SHEAF_ORDER;
    let atlas: GluedAtlas = glue(&parse(&identity_charts(k, 2)), &AtlasParams::default())
        .map_err(|e| e.to_string())?
        .atlas;
    let input = unipotent_sheaf(k, &[("1", rat(0)), ("2", rat(1))]);
    let data = SheafData::from_input(&input, None, None).map_err(|e| e.to_string())?;
    let g12 = data.g("1", "2").ok_or("missing g_12")?.clone();
    ensure(
        g12 == JetMatrix::from_rows(unipotent(k, rat(1))).unwrap(),
        "g_12 is not [[1, tz], [0, 1]]",
    )?;
    validate_sheaf_cocycle(&data, Some(&atlas)).map_err(|e| e.to_string())?;

    // Residual of (g_21 ∘ phi_12) g_12 - Id computed directly.
    let phi = atlas.phi("1", "2").unwrap().unwrap();
    let g21 = data.g("2", "1").ok_or("missing g_21")?;
    let residual = g21
        .compose(&phi)
        .and_then(|m| m.try_mul(&g12))
        .and_then(|m| m.try_sub(&JetMatrix::identity(2, 2, k)))
        .map_err(|e| e.to_string())?;
    ensure(
        residual.entries().iter().all(Jet::is_zero),
        "cocycle residual is nonzero",
    )?;

    let floor = ratio(1, 1 << 20);
    let glued = glue_sheaf(&data, &atlas, &floor).map_err(|e| e.to_string())?;
    for p in &glued.pairs {
        ensure(
            p.zero_section == base_identity(k),
            format!("zero section of ({}, {}) differs", p.i, p.j),
        )?;
    }
    let family = |bump: bool| -> Vec<(String, JetMatrix)> {
        ["1", "2"]
            .iter()
            .map(|id| {
                let mut m = JetMatrix::identity(2, 2, k);
                if bump && *id == "2" {
                    m.set(0, 1, tz(k, &[(0, 1, c(1, 1))]));
                }
                (id.to_string(), m)
            })
            .collect()
    };
    let id = glue_sheaf_morphism(&glued, &glued, &family(false), Some(&atlas), &floor).map_err(|e| e.to_string())?;
    ensure(id.isomorphism, "identity family is not an isomorphism")?;
    match glue_sheaf_morphism(&glued, &glued, &family(true), Some(&atlas), &floor) {
        Err(Error::Agreement { summary, .. }) => {
            Ok(format!("residual 0, base data restored, perturbed family: {summary}"))
        }
        Err(e) => Err(format!("perturbed family failed for the wrong reason: {e}")),
        Ok(_) => Err("perturbed family accepted".into()),
    }
}

fn tep_axioms() -> Check {
    let fixture = TepData::from_doc(&swap_tep(TEP_ORDERS, 1), None, None).map_err(|e| e.to_string())?;
    let y = [Gaussian::zero()];
    let flat = validate_tep_flatness(&fixture).map_err(|e| e.to_string())?;
    let pairing = validate_tep_pairing(&fixture).map_err(|e| e.to_string())?;
    let ic = check_ic(&fixture, &y).map_err(|e| e.to_string())?;
    let gc = check_gc(&fixture, &y).map_err(|e| e.to_string())?;

    let mut perturbed_doc = swap_tep(TEP_ORDERS, 1);
    let k = TEP_ORDERS.t + TEP_ORDERS.z;
    let mut a = JetMatrix::from_doc(&perturbed_doc.a[0], 2, k).unwrap();
    a.set(0, 1, tz(k, &[(0, 0, c(1, 1)), (1, 0, c(1, 1))]));
    perturbed_doc.a[0] = a.to_doc();
    let perturbed = validate_tep_flatness(&TepData::from_doc(&perturbed_doc, None, None).unwrap()).unwrap();

    let mut anti_doc = swap_tep(TEP_ORDERS, 1);
    let mut p = JetMatrix::from_doc(&anti_doc.p, 2, k).unwrap();
    p.set(1, 0, tz(k, &[(0, 0, c(-1, 1))]));
    anti_doc.p = p.to_doc();
    let anti = validate_tep_pairing(&TepData::from_doc(&anti_doc, None, None).unwrap()).unwrap();

    ensure(
        flat.flat && flat.residuals.is_empty(),
        format!("flatness residuals {:?}", flat.residuals),
    )?;
    ensure(ic, "IC fails")?;
    ensure(gc.holds, format!("GC fails, dims {:?}", gc.dims))?;
    ensure(!perturbed.flat, "perturbing A_12 kept the connection flat")?;
    ensure(!anti.symmetric, "antisymmetric pairing passed the symmetry axiom")?;
    let first = pairing.residuals.first().map(|r| {
        format!(
            "{} ({}, {}) at {:?} = {}",
            r.check,
            r.row,
            r.col,
            r.exponents,
            r.value.to_coeff().unwrap()
        )
    });
    ensure(
        pairing.holds() && pairing.residuals.is_empty(),
        format!(
            "flatness, IC, GC and both negative controls as required, but the pairing has {} nonzero residuals, first {}",
            pairing.residuals.len(),
            first.unwrap_or_default()
        ),
    )?;
    Ok("flatness and pairing residuals 0, IC and GC true, both negative controls rejected".into())
}

fn map_gluing() -> Check {
    let atlas = glue(&parse(&shear_pair(SHEAR_ORDER)), &AtlasParams::default())
        .map_err(|e| e.to_string())?
        .atlas;
    let maps = |bump: bool| -> Vec<ChartMap> {
        atlas
            .charts
            .iter()
            .map(|c| {
                let mut psi = PolyMap::identity(2, SHEAR_ORDER);
                if bump && c.id == "2" {
                    psi = map2(
                        tz(SHEAR_ORDER, &[(1, 0, common::c(1, 1))]),
                        tz(SHEAR_ORDER, &[(0, 1, common::c(1, 1)), (0, 2, common::c(1, 1))]),
                    );
                }
                ChartMap {
                    chart: c.id.clone(),
                    psi,
                    domain: None,
                }
            })
            .collect()
    };
    let floor = ratio(1, 1 << 20);
    let id = glue_chartwise_maps(&atlas, &atlas, &maps(false), &floor).map_err(|e| e.to_string())?;
    for c in &id.charts {
        let psi = PolyMap::from_doc(&c.psi, 2, SHEAR_ORDER).unwrap();
        ensure(
            psi == PolyMap::identity(2, SHEAR_ORDER),
            format!("chart {} is not the identity", c.chart),
        )?;
    }
    match glue_chartwise_maps(&atlas, &atlas, &maps(true), &floor) {
        Err(Error::Agreement { summary, .. }) if summary.contains("(1, 2)") => Ok(format!(
            "identity glued on {} charts; order-2 change rejected: {summary}",
            id.charts.len()
        )),
        Err(e) => Err(format!("rejected without naming the pair: {e}")),
        Ok(_) => Err("disagreeing maps accepted".into()),
    }
}

fn cli_run(dir: &Path, out: &str, args: &[&str]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let out_dir = dir.join(out);
    let run = Process::new(env!("CARGO_BIN_EXE_germglue"))
        .args(args)
        .arg("--seed")
        .arg(CLI_SEED)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        run.status.code() == Some(0),
        format!("`{}` exited with {:?}", args[0], run.status.code()),
    )?;
    let report = std::fs::read(out_dir.join("report.json")).map_err(|e| e.to_string())?;
    let summary = std::fs::read(out_dir.join("summary.txt")).map_err(|e| e.to_string())?;
    Ok((report, summary))
}

fn determinism() -> Check {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let write = |name: &str, text: String| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let shear = write("shear.json", serde_json::to_string(&shear_pair(SHEAR_ORDER)).unwrap());
    let atlas = write("atlas.json", serde_json::to_string(&identity_charts(3, 2)).unwrap());
    let sheaf = write(
        "sheaf.json",
        serde_json::to_string(&unipotent_sheaf(3, &[("1", rat(0)), ("2", rat(0))])).unwrap(),
    );
    let o = TepOrders { t: 3, z: 1 };
    let tep = write(
        "tep.json",
        serde_json::to_string(&vec![frobenius_tep("1", o), frobenius_tep("2", o)]).unwrap(),
    );
    let single = write("chart.json", serde_json::to_string(&frobenius_tep("1", o)).unwrap());
    let jobs: Vec<Vec<&str>> = vec![
        vec!["glue", "--samples", "200", shear.as_str()],
        vec!["tep-check", "--point", "1/3,0", "--point=-1/4,1/5", single.as_str()],
        vec!["glue-tep", atlas.as_str(), sheaf.as_str(), tep.as_str()],
    ];
    for (n, job) in jobs.iter().enumerate() {
        let first = cli_run(dir.path(), &format!("a{n}"), job)?;
        let second = cli_run(dir.path(), &format!("b{n}"), job)?;
        ensure(first == second, format!("`{}` differs between runs", job[0]))?;
    }
    Ok(format!(
        "{} commands byte-identical across two runs with seed {CLI_SEED}",
        jobs.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "jet kernels against oracles", jet_kernels),
        (2, "formal inversion of x + x^2", formal_inversion),
        (3, "product gluing round trip", product_gluing),
        (4, "nontrivial two-chart gluing", nontrivial_gluing),
        (5, "cocycle violation detection", cocycle_detection),
        (6, "transitivity audit", transitivity),
        (7, "sheaf gluing", sheaf_gluing),
        (8, "TEP axioms on the swap fixture", tep_axioms),
        (9, "map gluing", map_gluing),
        (10, "CLI determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    let mut ran = Vec::new();
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran.push(id);
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL  {name}: {detail}");
                failed.push(id);
            }
        }
    }
    let unexpected: Vec<u32> = failed
        .iter()
        .copied()
        .filter(|id| !EXPECTED_FAILURES.contains(id))
        .collect();
    let stale: Vec<u32> = EXPECTED_FAILURES
        .iter()
        .copied()
        .filter(|id| ran.contains(id) && !failed.contains(id))
        .collect();
    println!(
        "acceptance: {} of {} criteria pass; failing {failed:?} (expected {EXPECTED_FAILURES:?})",
        ran.len() - failed.len(),
        ran.len()
    );
    if !unexpected.is_empty() || !stale.is_empty() {
        println!("acceptance: unexpected failures {unexpected:?}, unexpected passes {stale:?}");
        std::process::exit(1);
    }
}
