//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use pfbench::attribution::{shapley_exact, shapley_mc};
use pfbench::harness::config::ExperimentConfig;
use pfbench::harness::data::synthetic_image;
use pfbench::harness::{run_benchmark, run_characterization};
use pfbench::imputation::{ImputerDescriptor, OcclusionRequest};
use pfbench::measures::{auc, cross_setup_variance, mif_lif, pf_curve, Gain};
use pfbench::predictor::{PredictorDescriptor, ResponseCurve};
use pfbench::ranking::{ndcg, Ranking};
use pfbench::rng;
use pfbench::segmentation::grid_mask;
use pfbench::value::{random_pf_baseline, FnGame, ModelGame, OcclusionContext, ValueFunctionSpec};
use pfbench::{AttributionVector, Coalition, FeatureOrdering, ImageTensor, MeasureRecord, SuperpixelMask};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    ensure(start.elapsed() < budget, || format!("took {:.1?}, budget {budget:?}", start.elapsed()))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..rest.len() {
            let x = rest.remove(k);
            prefix.push(x);
            go(prefix, rest, out);
            prefix.pop();
            rest.insert(k, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

fn config(toml: &str, dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(toml).expect("acceptance config parses");
    c.resolve_paths(dir);
    c.validate().expect("acceptance config is valid");
    c
}

// 1 ---------------------------------------------------------------------------

const IDENTITY_GRID: &str = r#"
output_dir = "out"
master_seed = 11
imputer_samples = 2
baseline_orderings = 8
[images]
kind = "synthetic"
count = 3
width = 16
height = 16
pool_size = 4
[grid]
n_superpixels = [4, 6]
imputers = [{ kind = "mean" }, { kind = "trainset" }, { kind = "histogram" }]
segmenters = [{ kind = "grid" }]
predictors = [{ kind = "additive_logit", id = "add" }]
[[methods]]
kind = "shapley"
mode = "exact"
[[methods]]
kind = "shapley"
id = "shapley_mc"
mode = "monte_carlo"
mc_samples = 64
[[methods]]
kind = "preddiff"
[[methods]]
kind = "arch_attribute"
[[methods]]
kind = "random"
"#;

fn srg_identity() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = run_benchmark::<f64>(&config(IDENTITY_GRID, dir.path()), false).map_err(|e| e.to_string())?;
    ensure(out.failures.is_empty(), || format!("failed setups: {:?}", out.failures))?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for a in &out.artifacts {
        ensure(a.result.records.len() == 5, || format!("{} records", a.result.records.len()))?;
        for r in &a.result.records {
            worst = worst.max((r.srg - (r.lif - r.mif)).abs()).max((r.srg - (r.mrg + r.lrg)).abs());
            count += 1;
        }
    }
    ensure(out.artifacts.len() == 6, || format!("{} setups", out.artifacts.len()))?;
    ensure(worst <= 1e-12, || format!("max identity error {worst:e}"))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("{count} records, max error {worst:.1e}"))
}

// 2 ---------------------------------------------------------------------------

/// Average marginal contribution over all n! arrival orders.
fn shapley_by_permutations(n: usize, v: &dyn Fn(u64) -> f64) -> Vec<f64> {
    let perms = permutations(n);
    let mut phi = vec![0.0; n];
    for p in &perms {
        let mut s = 0u64;
        for &i in p {
            phi[i] += v(s | 1 << i) - v(s);
            s |= 1 << i;
        }
    }
    phi.iter().map(|x| x / perms.len() as f64).collect()
}

fn shapley_axioms() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(2, &[rng::hash_str("axioms")]);
    let mut worst = 0.0f64;
    for game in 0..50 {
        // Players 0 and 1 are symmetric, the last player is null.
        let n = r.random_range(3..=8usize);
        let table: Vec<f64> = (0..1u64 << n).map(|_| r.random_range(-1.0..1.0)).collect();
        let canon = |s: u64| {
            let s = s & !(1 << (n - 1));
            let pair = (s & 1) + (s >> 1 & 1);
            (s & !3) | if pair == 2 { 3 } else { pair }
        };
        let v = |s: u64| table[canon(s) as usize];
        let other: Vec<f64> = (0..1u64 << n).map(|_| r.random_range(-1.0..1.0)).collect();
        let w = |s: u64| other[s as usize];

        let exact = |f: &(dyn Fn(u64) -> f64 + Sync)| {
            let g = FnGame::new(n, |c: &Coalition| {
                f(c.members().fold(0u64, |acc, i| acc | 1 << i))
            });
            shapley_exact::<f64, _>(&g, false).expect("game is valid")
        };
        let phi = exact(&v);
        let oracle = shapley_by_permutations(n, &v);
        let mut err = phi.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let full = (1u64 << n) - 1;
        err = err.max((phi.iter().sum::<f64>() - (v(full) - v(0))).abs());
        err = err.max((phi[0] - phi[1]).abs());
        err = err.max(phi[n - 1].abs());
        let combo = |s: u64| v(s) + 2.5 * w(s);
        let lin = exact(&combo);
        let phi_w = exact(&w);
        for i in 0..n {
            err = err.max((lin[i] - (phi[i] + 2.5 * phi_w[i])).abs());
        }
        ensure(err <= 1e-9, || format!("game {game} (n={n}): error {err:e}"))?;
        worst = worst.max(err);
    }
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("50 games, max error {worst:.1e}"))
}

// 3 ---------------------------------------------------------------------------

fn mc_convergence() -> Outcome {
    let start = Instant::now();
    let pair = FnGame::new(2, |s: &Coalition| if s.contains(0) && s.contains(1) { 1.0 } else { 0.0 });
    let seeds = 0..20u64;
    let mut worst = 0.0f64;
    let mut sq = [0.0f64; 2];
    for seed in seeds.clone() {
        for (k, m) in [250usize, 4000].into_iter().enumerate() {
            let phi: Vec<f64> = shapley_mc(&pair, m, seed, true).map_err(|e| e.to_string())?;
            let dev = phi.iter().map(|p| (p - 0.5).abs()).fold(0.0, f64::max);
            sq[k] += phi.iter().map(|p| (p - 0.5).powi(2)).sum::<f64>() / 2.0;
            if m == 4000 {
                worst = worst.max(dev);
            }
        }
    }
    let k = seeds.count() as f64;
    let (coarse, fine) = ((sq[0] / k).sqrt(), (sq[1] / k).sqrt());
    ensure(worst < 0.05, || format!("sup deviation at M=4000 is {worst}"))?;
    ensure(fine < coarse / 3.0, || format!("RMSE {fine:.5} at 4000 vs {coarse:.5} at 250"))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("max dev {worst:.4}, RMSE 250: {coarse:.5}, 4000: {fine:.5}, ratio {:.2}", coarse / fine))
}

// 4 ---------------------------------------------------------------------------

const FILL: [f64; 3] = [0.5, 0.25, 0.125];

fn fraction_config(draws: usize) -> String {
    format!(
        r#"
output_dir = "out"
master_seed = 4
[images]
kind = "synthetic"
count = 2
width = 16
height = 16
pool_size = 0
[grid]
n_superpixels = [16]
imputers = [{{ kind = "mean", channel_means = {FILL:?} }}]
segmenters = [{{ kind = "grid" }}]
predictors = [{{ kind = "occlusion_fraction", id = "frac", fill_color = {FILL:?} }}]
[[methods]]
kind = "random"
[characterize]
fractions = [0.0, 0.125, 0.25, 0.5, 0.75, 1.0]
draws = {draws}
"#
    )
}

fn analytic_r_oms() -> Outcome {
    let image = synthetic_image(16, 16, 4, "analytic");
    // The synthetic image never contains the fill color exactly.
    let mask = grid_mask(16, 16, 16).map_err(|e| e.to_string())?;
    let predictor = PredictorDescriptor::OcclusionFraction {
        id: "frac".into(),
        fill_color: FILL.to_vec(),
        curve: ResponseCurve::Linear,
        class_count: 2,
    }
    .build::<f64>(0, None)
    .map_err(|e| e.to_string())?;
    let imputer = ImputerDescriptor::Mean { channel_means: Some(FILL.to_vec()) }
        .build::<f64>(&FILL, None, "analytic", 0)
        .map_err(|e| e.to_string())?;
    let ctx = OcclusionContext::new(predictor.as_ref(), &image, "analytic", &mask, imputer.as_ref(), 1, 0)
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for r in [1, 2, 7, 20, 100] {
        let b = random_pf_baseline(&ctx, r).map_err(|e| e.to_string())?;
        worst = worst.max((b.r_oms_bar - 0.5).abs());
    }
    ensure(worst <= 1e-12, || format!("R̄-OMS off by {worst:e}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (rows, failures) =
        run_characterization::<f64>(&config(&fraction_config(50), dir.path())).map_err(|e| e.to_string())?;
    ensure(failures.is_empty(), || format!("{failures:?}"))?;
    ensure(rows.len() == 6, || format!("{} rows", rows.len()))?;
    let curve_err = rows
        .iter()
        .map(|r| (r.r_oms_mean - (1.0 - r.fraction)).abs())
        .fold(0.0, f64::max);
    ensure(curve_err <= 0.02, || format!("characterization off by {curve_err}"))?;
    Ok(format!("R̄-OMS error {worst:.1e}, characterization error {curve_err:.1e}"))
}

// 5 ---------------------------------------------------------------------------

struct Fixture {
    image: ImageTensor<f64>,
    mask: SuperpixelMask,
    predictor: Arc<dyn pfbench::predictor::Predictor<f64>>,
    imputer: Box<dyn pfbench::imputation::Imputer<f64>>,
}

impl Fixture {
    fn additive(n: usize, seed: u64, bias: f64, side: usize) -> Result<Self, String> {
        let id = format!("img{seed}");
        let image = Arc::new(synthetic_image(side, side, seed, &id));
        let mask = grid_mask(side, side, n).map_err(|e| e.to_string())?;
        let predictor = PredictorDescriptor::AdditiveLogit {
            id: "add".into(),
            bias,
            coef_low: 0.2,
            coef_high: 2.0,
            class_count: 2,
        }
        .build::<f64>(seed, Some((&image, rng::hash_str(&id), &mask)))
        .map_err(|e| e.to_string())?;
        let means = image.channel_means();
        let imputer = ImputerDescriptor::Mean { channel_means: None }
            .build::<f64>(&means, None, &id, seed)
            .map_err(|e| e.to_string())?;
        Ok(Self {
            image: Arc::unwrap_or_clone(image),
            mask,
            predictor,
            imputer,
        })
    }

    fn context(&self, seed: u64) -> Result<OcclusionContext<'_, f64>, String> {
        OcclusionContext::new(self.predictor.as_ref(), &self.image, "img", &self.mask, self.imputer.as_ref(), 1, seed)
            .map_err(|e| e.to_string())
    }
}

fn additive_optimality() -> Outcome {
    let mut checked = 0;
    for n in [4usize, 5] {
        for seed in 0..10u64 {
            let fx = Fixture::additive(n, seed, 0.0, 20)?;
            let ctx = fx.context(seed)?;
            let game = ModelGame { ctx: &ctx, spec: ValueFunctionSpec::default() };
            let phi = shapley_exact(&game, false).map_err(|e| e.to_string())?;
            let shapley_order = AttributionVector::new(phi, "shapley", "s")
                .and_then(|v| v.ordering())
                .map_err(|e| e.to_string())?;

            let mut aucs = BTreeMap::new();
            for p in permutations(n) {
                let pi = FeatureOrdering::new(p.clone()).map_err(|e| e.to_string())?;
                aucs.insert(p, auc(&pf_curve(&ctx, &pi, "enum").map_err(|e| e.to_string())?));
            }
            let srg = |p: &Vec<usize>| {
                let rev: Vec<usize> = p.iter().rev().copied().collect();
                aucs[&rev] - aucs[p]
            };
            let best_srg = aucs.keys().map(srg).fold(f64::NEG_INFINITY, f64::max);
            let mif_opt = aucs.iter().min_by(|a, b| a.1.total_cmp(b.1)).map(|e| e.0.clone()).unwrap();
            let lif_opt = aucs.iter().max_by(|a, b| a.1.total_cmp(b.1)).map(|e| e.0.clone()).unwrap();
            let order = shapley_order.as_slice().to_vec();
            let shapley_srg = srg(&order);
            ensure(shapley_srg >= best_srg - 1e-12, || {
                format!("n={n} seed={seed}: Shapley SRG {shapley_srg} < max {best_srg}")
            })?;
            ensure(mif_opt == order, || format!("n={n} seed={seed}: MIF optimum {mif_opt:?} vs {order:?}"))?;
            let rev: Vec<usize> = order.iter().rev().copied().collect();
            ensure(lif_opt == rev, || format!("n={n} seed={seed}: LIF optimum {lif_opt:?} vs {rev:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} predictors, all n! orderings enumerated"))
}

// 6 ---------------------------------------------------------------------------

fn random_nulls() -> Outcome {
    const DRAWS: usize = 200;
    const R: usize = 400;
    let fx = Fixture::additive(8, 6, -1.0, 24)?;
    let ctx = fx.context(6)?;
    let baseline = random_pf_baseline(&ctx, R).map_err(|e| e.to_string())?;
    let r_bar = baseline.r_oms_bar;
    let var_auc = baseline.aucs.iter().map(|a| (a - r_bar).powi(2)).sum::<f64>() / (R - 1) as f64;

    let mut gains: [Vec<f64>; 3] = Default::default();
    let mut r = rng::stream(6, &[rng::hash_str("nulls")]);
    for d in 0..DRAWS {
        let mut order: Vec<usize> = (0..8).collect();
        order.shuffle(&mut r);
        let phi: Vec<f64> = (0..8).map(|i| -(order.iter().position(|&o| o == i).unwrap() as f64)).collect();
        let v = AttributionVector::new(phi, format!("random{d}"), "s").map_err(|e| e.to_string())?;
        let (mif, lif) = mif_lif(&ctx, &v).map_err(|e| e.to_string())?;
        let rec = MeasureRecord::from_aucs("s", "random", mif, lif, r_bar);
        for (g, x) in gains.iter_mut().zip([rec.mrg, rec.lrg, rec.srg]) {
            g.push(x);
        }
    }
    let mut parts = Vec::new();
    for (name, xs) in ["MRG", "LRG", "SRG"].iter().zip(&gains) {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        // MRG and LRG also carry the error of the R-ordering baseline.
        let se = if *name == "SRG" { (var / k).sqrt() } else { (var / k + var_auc / R as f64).sqrt() };
        let z = mean / se;
        ensure(z.abs() < 3.0, || format!("{name}: mean {mean:.5}, {z:.2} standard errors"))?;
        parts.push(format!("{name} {z:+.2} SE"));
    }
    Ok(parts.join(", "))
}

// 7 ---------------------------------------------------------------------------

fn ndcg_oracle() -> Outcome {
    let ranking = |ms: &[&str]| Ranking {
        setup_id: "s".into(),
        methods: ms.iter().map(|m| m.to_string()).collect(),
        measure: pfbench::ranking::Measure::Srg,
    };
    let reference = ranking(&["A", "B", "C"]);
    let got = ndcg(&ranking(&["C", "B", "A"]), &reference).map_err(|e| e.to_string())?;
    let l3 = 3f64.log2();
    let hand = (1.0 + 2.0 / l3 + 3.0 / 2.0) / (3.0 + 2.0 / l3 + 1.0 / 2.0);
    ensure((got - hand).abs() <= 1e-6 && (got - 0.7900).abs() < 5e-5, || format!("nDCG {got} vs {hand}"))?;
    let mut r = rng::stream(7, &[rng::hash_str("ndcg")]);
    for k in 0..100 {
        let len = r.random_range(1..=12usize);
        let mut ms: Vec<String> = (0..len).map(|i| format!("m{i}")).collect();
        ms.shuffle(&mut r);
        let rk = Ranking { setup_id: "s".into(), methods: ms, measure: pfbench::ranking::Measure::Mif };
        let self_score = ndcg(&rk, &rk).map_err(|e| e.to_string())?;
        ensure((self_score - 1.0).abs() <= 1e-12, || format!("ranking {k}: nDCG(r,r) = {self_score}"))?;
    }
    Ok(format!("example {got:.6}, 100 self-rankings at 1"))
}

// 8 ---------------------------------------------------------------------------

const STABILITY_GRID: &str = r#"
output_dir = "out"
master_seed = 8
imputer_samples = 3
baseline_orderings = 20
[images]
kind = "synthetic"
count = 6
width = 24
height = 24
pool_size = 8
[grid]
n_superpixels = [6, 9]
imputers = [{ kind = "mean" }, { kind = "histogram" }]
segmenters = [{ kind = "grid" }]
predictors = [
  { kind = "additive_logit", id = "low", bias = -4.0 },
  { kind = "additive_logit", id = "medium", bias = 0.0 },
  { kind = "additive_logit", id = "high", bias = 4.0 },
]
[[methods]]
kind = "shapley"
mode = "exact"
"#;

fn stability() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = run_benchmark::<f64>(&config(STABILITY_GRID, dir.path()), false).map_err(|e| e.to_string())?;
    ensure(out.failures.is_empty(), || format!("failed setups: {:?}", out.failures))?;
    ensure(out.artifacts.len() == 12, || format!("{} setups", out.artifacts.len()))?;
    let records: Vec<MeasureRecord<f64>> =
        out.artifacts.iter().filter_map(|a| a.result.record("shapley").cloned()).collect();
    let r_bars: Vec<f64> = out.artifacts.iter().map(|a| a.result.r_oms_bar).collect();
    let var = |g| cross_setup_variance(&records, g).map_err(|e| e.to_string());
    let (mrg, lrg, srg) = (var(Gain::Mrg)?, var(Gain::Lrg)?, var(Gain::Srg)?);
    let lo = r_bars.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r_bars.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let detail = format!(
        "R̄-OMS in [{lo:.3}, {hi:.3}], Var MRG {mrg:.5}, LRG {lrg:.5}, SRG {srg:.5}, ratio {:.1}",
        mrg.max(lrg) / srg
    );
    ensure(lo < 0.4 && hi > 0.9, || format!("grid does not span low to high R̄-OMS: {detail}"))?;
    ensure(5.0 * srg <= mrg.max(lrg), || detail.clone())?;
    within_budget(start, Duration::from_secs(600))?;
    Ok(detail)
}

// 9 ---------------------------------------------------------------------------

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in [1usize, 8] {
        let mut c = config(IDENTITY_GRID, dir.path());
        c.workers = workers;
        c.output_dir = dir.path().join(format!("w{workers}"));
        let out = run_benchmark::<f64>(&c, false).map_err(|e| e.to_string())?;
        ensure(out.failures.is_empty(), || format!("{:?}", out.failures))?;
        outputs.push(csv_files(&c.output_dir));
    }
    ensure(outputs[0].len() >= 3, || format!("only {:?}", outputs[0].keys()))?;
    for (name, bytes) in &outputs[0] {
        ensure(outputs[1].get(name) == Some(bytes), || format!("{name} differs between 1 and 8 workers"))?;
    }
    Ok(format!("{} CSV files identical", outputs[0].len()))
}

// 10 --------------------------------------------------------------------------

fn imputer_contracts() -> Outcome {
    let tool = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = tool.path().join("echo.sh");
    std::fs::write(&script, "#!/bin/sh\ncp \"$1/input.png\" \"$1/output.png\"\n").map_err(|e| e.to_string())?;
    let external: ImputerDescriptor = toml::from_str(&format!(
        "kind = \"external\"\ncommand = \"sh\"\nargs = [{:?}]\ntimeout_secs = 30.0\n",
        script.display().to_string()
    ))
    .map_err(|e| e.to_string())?;
    let imputers = [
        ImputerDescriptor::Mean { channel_means: None },
        ImputerDescriptor::Trainset,
        ImputerDescriptor::Histogram,
        ImputerDescriptor::Inpaint { radius: 3 },
        external,
    ];
    let pool: Arc<Vec<ImageTensor<f64>>> =
        Arc::new((0..4).map(|i| synthetic_image(20, 16, 10, &format!("pool{i}"))).collect());
    let mut r = rng::stream(10, &[rng::hash_str("contracts")]);
    for desc in &imputers {
        for trial in 0..100u64 {
            let id = format!("c{trial}");
            let image = synthetic_image(20, 16, trial, &id);
            let n = r.random_range(2..=16usize);
            let mask = grid_mask(20, 16, n).map_err(|e| e.to_string())?;
            let n = mask.n();
            // At least one kept and one occluded superpixel.
            let mut members: Vec<usize> = (0..n).collect();
            members.shuffle(&mut r);
            let kept = r.random_range(1..n);
            let present = Coalition::from_members(n, members[..kept].iter().copied()).map_err(|e| e.to_string())?;
            let imputer = desc
                .build::<f64>(&image.channel_means(), Some(pool.clone()), &id, trial)
                .map_err(|e| e.to_string())?;
            let req = OcclusionRequest::new(&image, &mask, &present, trial).map_err(|e| e.to_string())?;
            let out = imputer
                .impute(&req, &mut rng::stream(10, &[trial]))
                .map_err(|e| format!("{}: {e}", desc.id()))?;
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for i in present.members() {
                for &p in mask.segment(i) {
                    let (a, b) = (image.pixel(p as usize), out.pixel(p as usize));
                    ensure(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()), || {
                        format!("{} trial {trial}: kept pixel {p} changed", desc.id())
                    })?;
                    for c in 0..3 {
                        lo[c] = lo[c].min(a[c]);
                        hi[c] = hi[c].max(a[c]);
                    }
                }
            }
            ensure(out.data().iter().all(|v| (0.0..=1.0).contains(v)), || {
                format!("{} trial {trial}: value outside [0,1]", desc.id())
            })?;
            if matches!(desc, ImputerDescriptor::Inpaint { .. }) {
                for p in 0..out.pixel_count() {
                    for c in 0..3 {
                        let v = out.pixel(p)[c];
                        ensure(v >= lo[c] - 1e-12 && v <= hi[c] + 1e-12, || {
                            format!("inpaint trial {trial}: pixel {p} channel {c} = {v} outside [{}, {}]", lo[c], hi[c])
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("{} imputers x 100 pairs", imputers.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("SRG identity on a 3x2x1 grid with 5 methods", srg_identity),
        ("Shapley axioms against permutation enumeration", shapley_axioms),
        ("Monte Carlo Shapley convergence on the pair game", mc_convergence),
        ("analytic R-OMS baseline and fraction characterization", analytic_r_oms),
        ("additive-model optimality of the Shapley ordering", additive_optimality),
        ("random-attribution nulls", random_nulls),
        ("nDCG oracle", ndcg_oracle),
        ("SRG stability across a 12-setup grid", stability),
        ("determinism across worker counts", determinism),
        ("imputer contracts", imputer_contracts),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
