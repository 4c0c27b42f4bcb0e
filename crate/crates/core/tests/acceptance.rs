//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p mech-wigner --test acceptance`; pass criterion
//! numbers after `--` to run a subset. Criteria listed in
//! [`KNOWN_UNATTAINABLE`] are reported as FAIL; for those the suite instead
//! checks the explanation (see README), and exits non-zero only on
//! unexplained failures.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2, TAU};
use std::time::Instant;

use mech_wigner::backaction::{
    conditional_update, measurement_operators, run_sequence, Outcome, RamanDrive, ScheduleEntry, SequencePolicy, UpdateMode,
};
use mech_wigner::dynamics::{
    jc_hamiltonian, pe_exact_two_mode, pe_exact_unitary, photon_dim_for_intensity, two_mode_entries, two_mode_hamiltonian,
    total_excitation, AtomMixture, CouplingSet, ExcitationBlocks,
};
use mech_wigner::fockspace::{
    annihilation, atom_state, displacement, embed, evolve, make_state, partial_trace, tensor, AtomLevel, CMatrix, CVector,
    HilbertSpec, ModeOperator, Propagator, QuantumState, StateSpec, Subsystem,
};
use mech_wigner::tomography::{
    char_fn, extract_char_fn, pe_approx, probe_grid, resample_polar, synthesize_records, wigner_direct, wigner_from_charfn,
    wigner_from_charfn_at, wigner_series, IntensityPolicy, MuGrid, ProbeGridSpec, SynthesisMode, WignerGrid, WignerSpec,
};
use mech_wigner::C64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// criterion 1
const CHARFN_TOL: f64 = 1e-10;
// criterion 2
const RABI_TOL: f64 = 1e-10;
// criterion 3
const COMPOSITE_TOL: f64 = 1e-8;
// criterion 4
const LARGE_I_BOUND: f64 = 0.05;
// criterion 5
const ROUND_TRIP_TOL: f64 = 1e-3;
const ORIGIN_TOL: f64 = 2e-3;
const CAT_NEGATIVITY: f64 = -0.05;
const INTEGRAL_TOL: f64 = 2e-3;
// criterion 7
const PURITY_TOL: f64 = 1e-9;
const ORACLE_INFIDELITY: f64 = 1e-2;
// criterion 8
const PROB_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;
const COMPOSITION_TOL: f64 = 1e-8;
const HERMITIAN_SYM_TOL: f64 = 1e-10;

/// Criteria that cannot pass as stated; each is replaced by a check of why.
const KNOWN_UNATTAINABLE: [u32; 2] = [4, 7];

struct Report {
    id: u32,
    title: &'static str,
    checks: Vec<(String, bool)>,
    /// Checks that pin the analysis of a known failure.
    explanation: Vec<(String, bool)>,
}

impl Report {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new(), explanation: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn explain(&mut self, what: impl Into<String>, ok: bool) {
        self.explanation.push((what.into(), ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, fn() -> Report); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut unexplained = Vec::new();
    let mut passed = 0;
    let mut ran = 0;
    for (id, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let r = run();
        ran += 1;
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!("criterion {} {status}: {} ({:.1?})", r.id, r.title, start.elapsed());
        for (what, ok) in &r.checks {
            println!("    [{}] {what}", if *ok { "ok" } else { "failed" });
        }
        for (what, ok) in &r.explanation {
            println!("    [{}] explanation: {what}", if *ok { "ok" } else { "failed" });
        }
        if r.passed() {
            passed += 1;
        } else if !KNOWN_UNATTAINABLE.contains(&r.id) {
            unexplained.push(r.id);
        }
        if r.explanation.iter().any(|(_, ok)| !ok) {
            unexplained.push(r.id);
        }
    }
    println!("{passed}/{ran} criteria pass");
    if !unexplained.is_empty() {
        println!("unexplained failures: {unexplained:?}");
        std::process::exit(1);
    }
}

fn laguerre(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn criterion_1() -> Report {
    let mut r = Report::new(1, "characteristic functions match closed forms, |μ| ≤ 3, dim 64");
    let mus: Vec<C64> = (0..=6)
        .flat_map(|i| (0..12).map(move |j| C64::from_polar(0.5 * i as f64, TAU * j as f64 / 12.0 + 0.1)))
        .collect();
    let mut family = |name: &str, state: QuantumState, oracle: &dyn Fn(C64) -> C64| {
        let worst = mus.iter().map(|&m| (char_fn(&state, m).unwrap() - oracle(m)).norm()).fold(0.0, f64::max);
        r.check(format!("{name}: max error {worst:.2e} ≤ {CHARFN_TOL:.0e}"), worst <= CHARFN_TOL);
    };
    family("vacuum", make_state(64, StateSpec::Fock(0)).unwrap(), &|m| C64::from((-0.5 * m.norm_sqr()).exp()));
    let alpha = C64::new(0.8, -0.5);
    family("coherent(0.8-0.5i)", make_state(64, StateSpec::Coherent(alpha)).unwrap(), &|m| {
        (-0.5 * m.norm_sqr() + m * alpha.conj() - m.conj() * alpha).exp()
    });
    for n in 1..=5 {
        family(&format!("fock({n})"), make_state(64, StateSpec::Fock(n)).unwrap(), &|m| {
            C64::from((-0.5 * m.norm_sqr()).exp() * laguerre(n, m.norm_sqr()))
        });
    }
    for nbar in [0.3, 1.0] {
        family(&format!("thermal({nbar})"), make_state(64, StateSpec::Thermal(nbar)).unwrap(), &|m| {
            C64::from((-(nbar + 0.5) * m.norm_sqr()).exp())
        });
    }
    r
}

fn criterion_2() -> Report {
    let mut r = Report::new(2, "Rabi oscillation of |e,n⟩ equals cos²(λτ√(n+1))");
    let (lambda, dim) = (1.0, 10);
    let h = jc_hamiltonian(lambda, dim).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..=5 {
        let initial = tensor(&atom_state(AtomLevel::Excited), &make_state(dim, StateSpec::Fock(n)).unwrap()).unwrap();
        for k in 0..=100 {
            let tau = 0.05 * k as f64;
            let want = (lambda * tau * ((n + 1) as f64).sqrt()).cos().powi(2);
            worst = worst.max((pe_exact_unitary(&initial, &h, tau).unwrap() - want).abs());
        }
    }
    r.check(format!("n ≤ 5, λτ ∈ [0, 5]: max error {worst:.2e} ≤ {RABI_TOL:.0e}"), worst <= RABI_TOL);
    r
}

fn random_low_state(rng: &mut ChaCha8Rng, dim: usize, support: usize, rank: usize) -> QuantumState {
    let mut rho = CMatrix::zeros(dim, dim);
    for _ in 0..rank {
        let v = CVector::from_fn(dim, |n, _| {
            if n <= support {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                C64::default()
            }
        });
        let v = &v / C64::from(v.norm());
        rho += &v * v.adjoint() * C64::from(rng.random_range(0.1..1.0));
    }
    let tr = rho.trace();
    QuantumState::mixed(HilbertSpec::mode(dim).unwrap(), rho / tr).unwrap()
}

/// Photon-slot marginal of `U ρ U†` with the 50:50 beam splitter
/// `U = exp(π/4 (a†c − c†a))`, i.e. the state of `A = (a + c)/√2`.
fn composite_marginal(photon: &QuantumState, phonon: &QuantumState) -> QuantumState {
    let (dp, dc) = (photon.dim(), phonon.dim());
    let space = HilbertSpec::new(vec![dp, dc], false).unwrap();
    let a = embed(&annihilation(dp).unwrap(), &space, Subsystem::Mode(0)).unwrap();
    let c = embed(&annihilation(dc).unwrap(), &space, Subsystem::Mode(1)).unwrap();
    let gen = &a.adjoint() * &c - &c.adjoint() * &a;
    let u = Propagator::new(&gen.scale(C64::i())).unwrap().unitary(FRAC_PI_4);
    let rho = tensor(photon, phonon).unwrap().density();
    let rotated = u.matrix() * rho * u.matrix().adjoint();
    partial_trace(&QuantumState::mixed(space, rotated).unwrap(), &[Subsystem::Mode(0)]).unwrap()
}

fn criterion_3() -> Report {
    let mut r = Report::new(3, "two-mode P_e equals √2·g single-mode JC under the beam-splitter oracle");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = 1.7;
    let taus: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
    for (dp, dc) in [(16, 16), (12, 9), (8, 16)] {
        // complete number blocks: n_a + n_c ≤ min(dp, dc) − 2
        let support = (dp.min(dc) - 2) / 2;
        let mut worst: f64 = 0.0;
        let blocks = ExcitationBlocks::new(&CouplingSet::matched(g), dp, dc).unwrap();
        let jc = jc_hamiltonian(SQRT_2 * g, dp).unwrap();
        for am in [AtomMixture::ground(), AtomMixture::excited(), AtomMixture::new(0.3, 0.7).unwrap()] {
            let photon = random_low_state(&mut rng, dp, support, 2);
            let phonon = random_low_state(&mut rng, dc, support, 1);
            let two_mode = pe_exact_two_mode(&blocks, am, &photon, &phonon, &taus).unwrap();
            let single = tensor(&am.state(), &composite_marginal(&photon, &phonon)).unwrap();
            for (tau, p) in taus.iter().zip(&two_mode) {
                worst = worst.max((pe_exact_unitary(&single, &jc, *tau).unwrap() - p).abs());
            }
        }
        r.check(format!("{dp}⊗{dc}: max error {worst:.2e} ≤ {COMPOSITE_TOL:.0e}"), worst <= COMPOSITE_TOL);
    }
    // the dense two-mode route agrees with the block route
    let (dp, dc) = (6, 5);
    let photon = random_low_state(&mut rng, dp, 1, 1);
    let phonon = random_low_state(&mut rng, dc, 1, 1);
    let am = AtomMixture::new(0.6, 0.4).unwrap();
    let dense = tensor(&tensor(&am.state(), &photon).unwrap(), &phonon).unwrap();
    let h = two_mode_hamiltonian(&CouplingSet::matched(g), dp, dc).unwrap();
    let blocks = ExcitationBlocks::new(&CouplingSet::matched(g), dp, dc).unwrap();
    let via_blocks = pe_exact_two_mode(&blocks, am, &photon, &phonon, &taus).unwrap();
    let worst = taus
        .iter()
        .zip(&via_blocks)
        .map(|(t, p)| (pe_exact_unitary(&dense, &h, *t).unwrap() - p).abs())
        .fold(0.0, f64::max);
    r.check(format!("dense vs block evolution: {worst:.2e} ≤ {COMPOSITE_TOL:.0e}"), worst <= COMPOSITE_TOL);
    r
}

fn criterion_4() -> Report {
    let mut r = Report::new(4, "large-I formula converges to exact two-mode evolution");
    let g = 1.0;
    let dc = 16;
    let vac = make_state(dc, StateSpec::Fock(0)).unwrap();
    let taus: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
    let mut printed = Vec::new();
    let mut with_noise = Vec::new();
    let mut floor: f64 = 0.0;
    for intensity in [25.0, 100.0, 400.0] {
        let dp = photon_dim_for_intensity(intensity);
        let blocks = ExcitationBlocks::new(&CouplingSet::matched(g), dp, dc).unwrap();
        let photon = make_state(dp, StateSpec::Coherent(C64::new(intensity.sqrt(), 0.0))).unwrap();
        let exact = pe_exact_two_mode(&blocks, AtomMixture::ground(), &photon, &vac, &taus).unwrap();
        let (mut d, mut dn) = (0.0f64, 0.0f64);
        for (&tau, e) in taus.iter().zip(&exact) {
            let approx = pe_approx(&vac, AtomMixture::ground(), g, tau, intensity, 0.0).unwrap();
            d = d.max((approx.value - e).abs());
            // the quantized Raman mode adds its own vacuum factor e^{−|μ|²/2}
            let photon_noise = 0.5 - 0.5 * (-(g * tau).powi(2)).exp() * approx.theta.cos();
            dn = dn.max((photon_noise - e).abs());
            floor = floor.max(0.5 * ((-0.5 * (g * tau).powi(2)).exp() - (-(g * tau).powi(2)).exp()));
        }
        printed.push(d);
        with_noise.push(dn);
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    r.check(format!("max |Δ| over I = 25, 100, 400 decreasing: [{}]", fmt(&printed)), printed.windows(2).all(|w| w[1] < w[0]));
    r.check(format!("max |Δ| at I = 400 is {:.4} < {LARGE_I_BOUND}", printed[2]), printed[2] < LARGE_I_BOUND);
    r.explain(
        format!("with the photon vacuum factor the deviation decays: [{}], < 0.01 at I = 400", fmt(&with_noise)),
        with_noise.windows(2).all(|w| w[1] < w[0]) && with_noise[2] < 0.01,
    );
    r.explain(
        format!("printed-formula deviation {:.4} sits at the I-independent floor {floor:.4}", printed[2]),
        (printed[2] - floor).abs() < 0.01,
    );
    r
}

struct Pipeline {
    reconstructed: WignerGrid,
    direct: WignerGrid,
    cart: mech_wigner::tomography::CharFnGrid,
}

fn pipeline(rho: &QuantumState, raster: (usize, usize), mu_max: f64, mu_n: usize, spec: &WignerSpec, shots: Option<(u64, u64)>) -> Pipeline {
    let g = 830.0;
    let grid_spec = ProbeGridSpec { mu_max, radial_count: raster.0, angular_count: raster.1, intensity: IntensityPolicy::default() };
    let sites = probe_grid(&grid_spec, g, rho.dim()).unwrap();
    let records = synthesize_records(
        rho,
        AtomMixture::ground(),
        &sites,
        g,
        SynthesisMode::ClosedForm,
        shots.map(|s| s.0),
        shots.map(|s| s.1),
    )
    .unwrap();
    let polar = extract_char_fn(&records).unwrap();
    let mu_grid = MuGrid::disk(mu_n, mu_max);
    let cart = resample_polar(&polar, &mu_grid).unwrap();
    Pipeline { reconstructed: wigner_from_charfn(&cart, spec).unwrap(), direct: wigner_direct(rho, &mu_grid, spec).unwrap(), cart }
}

fn criterion_5() -> Report {
    let mut r = Report::new(5, "noise-free tomography round trip");
    let spec = WignerSpec::symmetric(64, 5.0);
    let raster = (128, 512);
    let cat = StateSpec::Cat { alpha: C64::new(1.5, 0.0), phase: 0.0 };
    let states = [
        ("vacuum", StateSpec::Fock(0)),
        ("fock(1)", StateSpec::Fock(1)),
        ("coherent(1)", StateSpec::Coherent(C64::new(1.0, 0.0))),
        ("cat(1.5)", cat),
    ];
    for (name, s) in states {
        let p = pipeline(&make_state(64, s).unwrap(), raster, 4.0, 64, &spec, None);
        let err = p.reconstructed.max_abs_diff(&p.direct).unwrap();
        r.check(format!("{name}: max |W_rec − W_direct| = {err:.2e} ≤ {ROUND_TRIP_TOL:.0e} (dim 64, μ_max 4, 64×64)"), err <= ROUND_TRIP_TOL);
        if name == "cat(1.5)" {
            // lobes sit at x = ±1.5√2
            let between = p.reconstructed.min_where(|x, _| x.abs() <= 1.0).unwrap();
            r.check(format!("cat(1.5): min W between lobes {between:.4} < {CAT_NEGATIVITY}"), between < CAT_NEGATIVITY);
        }
    }
    // wider μ disk so C has decayed at the boundary
    let wide = WignerSpec::symmetric(64, 6.0);
    let one = pipeline(&make_state(96, StateSpec::Fock(1)).unwrap(), raster, 6.0, 96, &wide, None);
    let w00 = wigner_from_charfn_at(&one.cart, 0.0, 0.0).unwrap();
    r.check(format!("fock(1): W(0,0) = {w00:.5} vs −2/π within {ORIGIN_TOL:.0e} (μ_max 6)"), (w00 + 2.0 / PI).abs() <= ORIGIN_TOL);
    for (name, s) in [("vacuum", StateSpec::Fock(0)), ("fock(1)", StateSpec::Fock(1)), ("coherent(1)", StateSpec::Coherent(C64::new(1.0, 0.0))), ("cat(1.5)", cat)] {
        let p = pipeline(&make_state(96, s).unwrap(), raster, 6.0, 96, &wide, None);
        let integral = p.reconstructed.integral();
        r.check(format!("{name}: ∫W = {integral:.5} within {INTEGRAL_TOL:.0e} (μ_max 6)"), (integral - 1.0).abs() <= INTEGRAL_TOL);
    }
    r
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_6() -> Report {
    let mut r = Report::new(6, "shot-noise error decreases with shots (vacuum, median of 10 seeds)");
    let vac = make_state(64, StateSpec::Fock(0)).unwrap();
    let spec = WignerSpec::symmetric(64, 5.0);
    let medians: Vec<f64> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&shots| {
            let errs = (0..10)
                .map(|seed| {
                    let p = pipeline(&vac, (64, 256), 4.0, 64, &spec, Some((shots, seed)));
                    p.reconstructed.max_abs_diff(&p.direct).unwrap()
                })
                .collect();
            median(errs)
        })
        .collect();
    r.check(
        format!("medians for 10³, 10⁴, 10⁵ shots: {:.3e}, {:.3e}, {:.3e} strictly decreasing", medians[0], medians[1], medians[2]),
        medians.windows(2).all(|w| w[1] < w[0]),
    );
    r
}

fn criterion_7() -> Report {
    let mut r = Report::new(7, "back-action sequence reproduces phase-space splitting");
    let (g, tau) = (830.0, 0.005);
    let mu = C64::new(0.0, g * tau);
    let vac = make_state(128, StateSpec::Fock(0)).unwrap();
    let entry = ScheduleEntry { tau, intensity: 400.0, phi: 0.0 };
    let log = run_sequence(&vac, "vacuum", g, 4, &[entry; 4], SequencePolicy::ConditionOnGround).unwrap();
    let spec = WignerSpec { nx: 128, np: 256, x_max: 4.0, p_max: 15.0 };
    let grids = log.wigner_snapshots(&spec).unwrap();
    let spread: Vec<f64> = grids.iter().map(|w| w.second_moment_along(mu)).collect();
    r.check(
        format!(
            "μ = {:.2}i; second moment of |W| along μ per snapshot [{}] strictly increasing",
            mu.im,
            spread.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(", ")
        ),
        spread.windows(2).all(|w| w[1] > w[0]),
    );
    let purity_dev = log.purity.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    r.check(format!("large-I purity deviation {purity_dev:.1e} ≤ {PURITY_TOL:.0e}"), purity_dev <= PURITY_TOL);
    let int_dev = grids.iter().map(|w| (w.integral() - 1.0).abs()).fold(0.0, f64::max);
    r.check(format!("snapshots integrate to 1 within {int_dev:.1e} ≤ {INTEGRAL_TOL:.0e}"), int_dev <= INTEGRAL_TOL);

    let small = make_state(32, StateSpec::Fock(0)).unwrap();
    let compare = |intensity: f64| {
        let raman = RamanDrive { intensity, phi: 0.0 };
        let approx = conditional_update(&small, Outcome::Ground, g, tau, raman, UpdateMode::LargeI).unwrap();
        let exact = conditional_update(&small, Outcome::Ground, g, tau, raman, UpdateMode::Exact).unwrap();
        (1.0 - approx.state.fidelity(&exact.state).unwrap(), exact.purity)
    };
    let (inf400, purity400) = compare(400.0);
    let (inf100, _) = compare(100.0);
    r.check(format!("step-1 infidelity with exact two-mode state at I = 400: {inf400:.4} < {ORACLE_INFIDELITY:.0e}"), inf400 < ORACLE_INFIDELITY);
    r.explain(format!("infidelity falls with I: {inf100:.4} at I = 100 > {inf400:.4} at I = 400"), inf400 < inf100);
    // photon recoil ±μ/2 leaves near-orthogonal photon branches, so the
    // oscillator is an incoherent mix of |±μ/2⟩: purity and fidelity ≈ ½
    let overlap = (-0.5 * mu.norm_sqr()).exp();
    r.explain(
        format!("exact reduced state is the recoil mixture: purity {purity400:.4} ≈ ½, infidelity ≈ ½ (photon branch overlap {overlap:.1e})"),
        (purity400 - 0.5).abs() < 0.05 && (inf400 - 0.5).abs() < 0.05,
    );
    r
}

fn random_pure(dim: usize, support: usize) -> impl Strategy<Value = QuantumState> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), support).prop_filter_map("zero vector", move |c| {
        let mut v = CVector::zeros(dim);
        for (n, (re, im)) in c.into_iter().enumerate() {
            v[n] = C64::new(re, im);
        }
        QuantumState::pure_normalized(HilbertSpec::mode(dim).unwrap(), v).ok()
    })
}

fn random_mixed(dim: usize, support: usize) -> impl Strategy<Value = QuantumState> {
    (random_pure(dim, support), random_pure(dim, support), 0.0..1.0f64).prop_map(move |(a, b, w)| {
        let rho = a.density() * C64::from(w) + b.density() * C64::from(1.0 - w);
        QuantumState::mixed(HilbertSpec::mode(dim).unwrap(), rho).unwrap()
    })
}

fn complex(max: f64) -> impl Strategy<Value = C64> {
    (0.0..max, 0.0..TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn criterion_8() -> Report {
    let mut r = Report::new(8, "structural invariants (property tests, fixed seed)");
    let mut property = |name: &str, outcome: Result<(), String>| {
        let ok = outcome.is_ok();
        let why = outcome.err().map(|e| format!(": {}", e.lines().next().unwrap_or_default().chars().take(200).collect::<String>()));
        r.check(format!("{name}{}", why.unwrap_or_default()), ok);
    };

    property(
        "probability bounds",
        runner(48)
            .run(&(random_mixed(12, 4), 0.0..1.0f64, 0.0..5.0f64, 1.0..500.0f64, 0.0..TAU), |(s, pe, t, i, phi)| {
                let am = AtomMixture::from_excited(pe).unwrap();
                let h = jc_hamiltonian(1.0, 12).unwrap();
                let p = pe_exact_unitary(&tensor(&am.state(), &s).unwrap(), &h, t).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                let a = pe_approx(&s, am, 1.0, t / 5.0, i, phi).unwrap();
                prop_assert!((0.0..=1.0).contains(&a.value));
                let (pg, pex) = mech_wigner::backaction::outcome_probabilities(&s, 1.0, t / 5.0, RamanDrive { intensity: i, phi }).unwrap();
                prop_assert!((-PROB_TOL..=1.0 + PROB_TOL).contains(&pg) && (-PROB_TOL..=1.0 + PROB_TOL).contains(&pex));
                prop_assert!((pg + pex - 1.0).abs() <= PROB_TOL);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    property(
        "trace and norm preservation",
        runner(32)
            .run(&(random_mixed(10, 5), random_pure(10, 5), 0.0..3.0f64, 0.1..2.0f64), |(rho, psi, t, lambda)| {
                let h = jc_hamiltonian(lambda, 10).unwrap();
                let ground = atom_state(AtomLevel::Ground);
                let mixed = evolve(&h, &tensor(&ground, &rho).unwrap(), t).unwrap();
                prop_assert!((mixed.total_probability() - 1.0).abs() <= NORM_TOL);
                prop_assert!((mixed.purity() - rho.purity()).abs() <= NORM_TOL);
                let pure = evolve(&h, &tensor(&ground, &psi).unwrap(), t).unwrap();
                prop_assert!((pure.total_probability() - 1.0).abs() <= NORM_TOL);
                let blocks = ExcitationBlocks::new(&CouplingSet::new(lambda, 0.7), 6, 5).unwrap();
                let v = tensor(&tensor(&ground, &make_state(6, StateSpec::Fock(2)).unwrap()).unwrap(), &make_state(5, StateSpec::Fock(1)).unwrap())
                    .unwrap();
                let out = blocks.evolve_vector(v.vector().unwrap(), t).unwrap();
                prop_assert!((out.norm() - 1.0).abs() <= NORM_TOL);
                let (k_g, k_e) = measurement_operators(10, lambda, t / 5.0, RamanDrive { intensity: 100.0, phi: t }).unwrap();
                let complete = k_g.adjoint() * k_g + k_e.adjoint() * k_e - ModeOperator::identity(&HilbertSpec::mode(10).unwrap());
                prop_assert!(complete.max_abs() <= NORM_TOL);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    property(
        "excitation conservation",
        runner(16)
            .run(&(-3.0..3.0f64, -3.0..3.0f64, 2usize..7, 2usize..7), |(g_ac, g_raman, dp, dc)| {
                let cs = CouplingSet::new(g_ac, g_raman);
                let h = two_mode_hamiltonian(&cs, dp, dc).unwrap();
                let n = total_excitation(dp, dc).unwrap();
                prop_assert!(h.commutator(&n).max_abs() <= 1e-12);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    // the 64⊗64 Hamiltonian is too large to commute densely; check its entries
    let numbers = mech_wigner::dynamics::excitation_numbers(64, 64);
    let conserved = two_mode_entries(&CouplingSet::new(1.3, -0.4), 64, 64).iter().all(|&(i, j, _)| numbers[i] == numbers[j]);
    property("excitation conservation at 64⊗64 (entry check)", if conserved { Ok(()) } else { Err("entry couples N blocks".into()) });

    property(
        "displacement composition D(α)D(β) = e^{i Im(αβ*)} D(α+β)",
        runner(32)
            .run(&(complex(1.2), complex(1.2), random_pure(60, 4)), |(a, b, psi)| {
                let dim = 60;
                let v = psi.vector().unwrap();
                let lhs = displacement(dim, a).unwrap().apply(&displacement(dim, b).unwrap().apply(v));
                let phase = C64::from_polar(1.0, (a * b.conj()).im);
                let rhs = displacement(dim, a + b).unwrap().apply(v) * phase;
                prop_assert!((lhs - rhs).norm() <= COMPOSITION_TOL);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    property(
        "C_W(−μ) = C_W(μ)* and |C_W| ≤ 1",
        runner(32)
            .run(&(random_mixed(40, 6), complex(3.0)), |(rho, mu)| {
                let c = char_fn(&rho, mu).unwrap();
                let cm = char_fn(&rho, -mu).unwrap();
                prop_assert!((cm - c.conj()).norm() <= HERMITIAN_SYM_TOL);
                prop_assert!(c.norm() <= 1.0 + HERMITIAN_SYM_TOL);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    property(
        "Wigner series integrates to 1 and matches the transform",
        runner(6)
            .run(&random_mixed(96, 4), |rho| {
                let spec = WignerSpec::symmetric(41, 6.0);
                let series = wigner_series(&rho, &spec).unwrap();
                prop_assert!((series.integral() - 1.0).abs() <= INTEGRAL_TOL);
                let direct = wigner_direct(&rho, &MuGrid::disk(96, 7.0), &spec).unwrap();
                prop_assert!(series.max_abs_diff(&direct).unwrap() <= ROUND_TRIP_TOL);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    // quarter-turn θ pairs are part of the inversion contract
    let sites = probe_grid(&ProbeGridSpec { mu_max: 3.0, radial_count: 4, angular_count: 9, intensity: IntensityPolicy::default() }, 830.0, 64).unwrap();
    let quarter = sites.iter().skip(1).all(|s| ((s.probes[0].theta - s.probes[1].theta).rem_euclid(TAU) - FRAC_PI_2).abs() < 1e-9);
    property("probe pairs differ by π/2 in θ", if quarter { Ok(()) } else { Err("pair off quarter turn".into()) });
    r
}
