//! Mittag-Leffler values frozen from a 60-digit reference computation
//! (scripts/ml_oracle.py): power series for small arguments, Talbot inversion
//! of the Laplace transform for large negative ones.

use caputo_core::mlf::{
    asymptotic_flux_model, gamma, kernel_laplace, ml_eval, ml_real, relaxation_kernel, rgamma, KernelQuery, MLParams,
};
use caputo_core::quad::{exp_sinh, gauss_kronrod};
use caputo_core::Error;

const REFERENCE: &[(f64, f64, f64, f64)] = &[
    (0.3, 1.0, -0.5, 0.63264900594359902138),
    (0.3, 1.0, -3.0, 0.21180263319643578039),
    (0.3, 1.0, 2.0, 79485.907625183497177),
    (0.3, 1.0, -30.0, 0.025182617502927663063),
    (0.3, 1.0, -100.0, 0.0076588562222866413892),
    (0.3, 1.0, -1000.0, 0.00076993246495257768237),
    (0.3, 1.0, -10000.0, 0.000077033810249795532305),
    (0.3, 1.0, -1000000.0, 7.7038273304247191831e-7),
    (0.3, 0.3, -0.5, 0.14375650014722127361),
    (0.3, 0.3, -3.0, 0.017243316421744134765),
    (0.3, 0.3, 2.0, 400586.4336688223654),
    (0.3, 0.3, -30.0, 0.00024690078959965228185),
    (0.3, 0.3, -100.0, 0.000022841967214289510715),
    (0.3, 0.3, -1000.0, 2.3084455544850575938e-7),
    (0.3, 0.3, -10000.0, 2.3108790665424754306e-9),
    (0.3, 0.3, -1000000.0, 2.3111468466554488554e-13),
    (0.5, 1.0, -0.5, 0.61569034419292587487),
    (0.5, 1.0, -3.0, 0.17900115118138995042),
    (0.5, 1.0, 2.0, 108.94090438997797241),
    (0.5, 1.0, 8.0, 1.2470298161623233766e+28),
    (0.5, 1.0, -30.0, 0.018795888861416751497),
    (0.5, 1.0, -100.0, 0.0056416137829894329036),
    (0.5, 1.0, -1000.0, 0.0005641893014533876542),
    (0.5, 1.0, -10000.0, 0.000056418958072680841152),
    (0.5, 1.0, -1000000.0, 5.6418958354747419216e-7),
    (0.5, 0.5, -0.5, 0.25634441145129334951),
    (0.5, 0.5, -3.0, 0.02718613000358643569),
    (0.5, 0.5, 2.0, 218.44599836350370111),
    (0.5, 0.5, 8.0, 9.9762385292985870127e+28),
    (0.5, 0.5, -30.0, 0.00031291770525374203432),
    (0.5, 0.5, -100.0, 0.000028205248812996592434),
    (0.5, 0.5, -1000.0, 2.8209436863274833442e-7),
    (0.5, 0.5, -10000.0, 2.8209478754245637265e-9),
    (0.5, 0.5, -1000000.0, 2.8209479177345500129e-13),
    (0.8, 1.0, -0.5, 0.60302371586280370036),
    (0.8, 1.0, -3.0, 0.11292019868221739872),
    (0.8, 1.0, 2.0, 13.415748887819016952),
    (0.8, 1.0, 8.0, 871077.44615116185909),
    (0.8, 1.0, -30.0, 0.0075758607992192103803),
    (0.8, 1.0, -100.0, 0.0022056788685091112591),
    (0.8, 1.0, -1000.0, 0.00021809575522748386578),
    (0.8, 1.0, -10000.0, 0.000021785193742450029062),
    (0.8, 1.0, -1000000.0, 2.1782515470656282145e-7),
    (0.8, 0.8, -0.5, 0.45793149810111437333),
    (0.8, 0.8, -3.0, 0.03991566425159708441),
    (0.8, 0.8, 2.0, 16.054157362005891669),
    (0.8, 0.8, 8.0, 1464971.8455557863232),
    (0.8, 0.8, -30.0, 0.00021082443010626109207),
    (0.8, 0.8, -100.0, 0.000017867951949876073561),
    (0.8, 0.8, -1000.0, 1.7469360255448726924e-7),
    (0.8, 0.8, -10000.0, 1.7430319551893456216e-9),
    (0.8, 0.8, -1000000.0, 1.7426034016146754002e-13),
    (1.2, 1.0, -0.5, 0.62140396103259633593),
    (1.2, 1.0, -3.0, -0.035645871490878126527),
    (1.2, 1.0, 2.0, 4.9961103922306312971),
    (1.2, 1.0, 8.0, 238.55612813463314015),
    (1.2, 1.0, -30.0, -0.006189775580038954311),
    (1.2, 1.0, -100.0, -0.0017566367124186755203),
    (1.2, 1.0, -1000.0, -0.00017216457522392797817),
    (1.2, 1.0, -10000.0, -0.000017182501937929968425),
    (1.2, 1.0, -1000000.0, -1.7178777988884332057e-7),
    (1.2, 1.2, -0.5, 0.74734575805529931065),
    (1.2, 1.2, -3.0, 0.076960994776386087464),
    (1.2, 1.2, 2.0, 4.3942240445902049887),
    (1.2, 1.2, 8.0, 168.6704314033480036),
    (1.2, 1.2, -30.0, -0.00026805637764968561791),
    (1.2, 1.2, -100.0, -0.000021559084843562525283),
    (1.2, 1.2, -1000.0, -2.0705145424100587023e-7),
    (1.2, 1.2, -10000.0, -2.0623517540749527784e-9),
    (1.2, 1.2, -1000000.0, -2.0614578712065409506e-13),
    (1.5, 1.0, -0.5, 0.66323679487242795678),
    (1.5, 1.0, -3.0, -0.17556537379997824292),
    (1.5, 1.0, 2.0, 3.3487008963183954036),
    (1.5, 1.0, 8.0, 36.43049445661076504),
    (1.5, 1.0, -30.0, -0.014470224834105874553),
    (1.5, 1.0, -100.0, -0.0027898467733372399413),
    (1.5, 1.0, -1000.0, -0.00028209108987501466549),
    (1.5, 1.0, -10000.0, -0.000028209475474899628667),
    (1.5, 1.0, -1000000.0, -2.8209479177017564933e-7),
    (1.5, 1.5, -0.5, 0.89886307554606876232),
    (1.5, 1.5, -3.0, 0.21497666776826928474),
    (1.5, 1.5, 2.0, 2.5483367190728557478),
    (1.5, 1.5, 8.0, 18.194276403521653667),
    (1.5, 1.5, -30.0, 0.0013125597381136678562),
    (1.5, 1.5, -100.0, -0.000040187938178347689031),
    (1.5, 1.5, -1000.0, -4.2312553090068829732e-7),
    (1.5, 1.5, -10000.0, -4.2314202104902754904e-9),
    (1.5, 1.5, -1000000.0, -4.2314218764415599158e-13),
];

const PARTIAL_SUMS: &[(f64, f64, f64, f64)] = &[
    (0.5, 1.0, -5.0, 0.11070463773306862593),
    (0.5, 1.0, -2.5, 0.21080636406114358065),
    (0.5, 1.0, 2.5, 1035.8148429726229083),
    (0.5, 1.0, 5.0, 144009798674.66104041),
    (0.5, 0.5, -5.0, 0.010666394882413150645),
    (0.5, 0.5, -2.5, 0.03717367339489733533),
    (0.5, 0.5, 2.5, 2590.101297015105027),
    (0.5, 0.5, 5.0, 720048993373.86939164),
    (0.8, 1.0, -5.0, 0.05759538476215225377),
    (0.8, 1.0, -2.5, 0.14341738258439233731),
    (0.8, 1.0, 2.5, 28.924178020934897843),
    (0.8, 1.0, 5.0, 2208.064357586446868),
    (0.8, 0.8, -5.0, 0.011828729724994502315),
    (0.8, 0.8, -2.5, 0.059297461753844131528),
    (0.8, 0.8, 2.5, 36.458059173367216833),
    (0.8, 0.8, 5.0, 3301.8834166355046836),
    (1.2, 1.0, -5.0, -0.072960176305759224764),
    (1.2, 1.0, -2.5, 0.0072148231691742828078),
    (1.2, 1.0, 2.5, 7.1649081745241770215),
    (1.2, 1.0, 5.0, 38.166177578453232928),
    (1.2, 1.2, -5.0, -0.0072653767137860831454),
    (1.2, 1.2, -2.5, 0.13245342313221016078),
    (1.2, 1.2, 2.5, 6.1039199001123041261),
    (1.2, 1.2, 5.0, 29.163253430449407007),
    (1.5, 1.0, -5.0, -0.3000820504131308808),
    (1.5, 1.0, -2.5, -0.089558637643441311285),
    (1.5, 1.0, 2.5, 4.2827508733340179391),
    (1.5, 1.0, 5.0, 12.457289126443951234),
    (1.5, 1.5, -5.0, 0.0045397084964453794347),
    (1.5, 1.5, -2.5, 0.30414824022950215241),
    (1.5, 1.5, 2.5, 3.0694396357520310669),
    (1.5, 1.5, 5.0, 7.2468424375621484878),
];

fn ml(a: f64, b: f64, x: f64) -> f64 {
    ml_real(&MLParams::new(a, b).unwrap(), x).unwrap()
}

#[test]
fn reference_table_to_1e10() {
    let mut worst: f64 = 0.0;
    for &(a, b, x, v) in REFERENCE {
        let got = ml(a, b, x);
        let err = (got - v).abs() / v.abs();
        assert!(err < 1e-10, "E_{{{a},{b}}}({x}) = {got}, expected {v} (rel {err:e})");
        worst = worst.max(err);
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn partial_sums_to_1e10() {
    for &(a, b, x, v) in PARTIAL_SUMS {
        let got = ml(a, b, x);
        assert!((got - v).abs() <= 1e-10 * v.abs(), "E_{{{a},{b}}}({x}) = {got}, expected {v}");
    }
}

#[test]
fn positive_overflow_is_signalled() {
    let p = MLParams::new(0.3, 1.0).unwrap();
    assert!(matches!(ml_real(&p, 8.0), Err(Error::Overflow(_))));
}

#[test]
fn half_order_large_argument_matches_leading_term() {
    let x = -1e4;
    let lead = -rgamma(-0.5) / (x * x);
    let v = ml(0.5, 0.5, x);
    assert!(((v - lead) / lead).abs() < 1e-3);
}

#[test]
fn complex_entry_point_on_real_axis() {
    let p = MLParams::new(0.5, 1.0).unwrap();
    let z = ml_eval(&p, -30.0).unwrap();
    assert_eq!(z.im, 0.0);
    assert!((z.re - 0.018_795_888_861_416_751).abs() < 1e-15);
}

#[test]
fn kernel_large_time_leading_term() {
    let t = 1e4;
    let k = relaxation_kernel(&KernelQuery::new(0.5, 1.0, t).unwrap()).unwrap();
    let lead = -t.powf(-1.5) / gamma(-0.5);
    assert!(((k - lead) / lead).abs() < 1e-3);
}

#[test]
fn kernel_positive_below_unit_order() {
    for &alpha in &[0.3, 0.5, 0.8, 1.0] {
        for &lambda in &[1.0, 10.0, 100.0] {
            let mut t: f64 = 1e-3;
            while t < 1e4 && lambda * t.powf(alpha) < 700.0 {
                let k = relaxation_kernel(&KernelQuery::new(alpha, lambda, t).unwrap()).unwrap();
                assert!(k > 0.0, "alpha={alpha} lambda={lambda} t={t}");
                t *= 1.7;
            }
        }
    }
}

#[test]
fn laplace_identity_by_quadrature() {
    for &alpha in &[0.3, 0.7, 1.0, 1.4] {
        for &lambda in &[0.5, 3.0, 20.0] {
            for &p in &[0.5, 2.0, 8.0] {
                let f = |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    (-p * t).exp() * relaxation_kernel(&KernelQuery::new(alpha, lambda, t).unwrap()).unwrap()
                };
                // t = v^(1/α) absorbs the t^(α-1) singularity on the head
                let head = gauss_kronrod(
                    |v: f64| {
                        let t = v.powf(1.0 / alpha);
                        f(t) * t.powf(1.0 - alpha) / alpha
                    },
                    0.0,
                    1.0,
                    1e-14,
                    1e-13,
                    200,
                )
                .value;
                let tail = exp_sinh(|t, _| f(t), 1.0, 1e-12).value;
                let exact = kernel_laplace(alpha, lambda, p).unwrap();
                let got = head + tail;
                assert!(((got - exact) / exact).abs() < 1e-6, "({alpha},{lambda},{p}): {got} vs {exact}");
            }
        }
    }
}

#[test]
fn flux_model_convention() {
    assert_eq!(asymptotic_flux_model(1.0, 7.0, 10.0).unwrap(), 0.0);
    assert!((asymptotic_flux_model(0.5, 1.0, 1.0).unwrap() - 0.282_094_791_773_878_14).abs() < 1e-15);
}
