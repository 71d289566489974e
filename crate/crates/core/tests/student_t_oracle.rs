//! The in-crate Student-t CDF against statrs, which takes its own route
//! through the regularized incomplete beta function.

use agdt_core::bayes::{student_t_cdf, student_t_pdf};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

#[test]
fn cdf_matches_statrs() {
    let mut worst = 0.0f64;
    for dof in (1..=30).chain([45, 60, 99, 250]) {
        let oracle = StudentsT::new(0.0, 1.0, dof as f64).unwrap();
        for k in -600..=600 {
            let t = k as f64 / 20.0;
            worst = worst.max((student_t_cdf(t, dof) - oracle.cdf(t)).abs());
        }
    }
    assert!(worst < 1e-12, "worst deviation {worst:e}");
}

#[test]
fn pdf_matches_statrs() {
    for dof in [1, 2, 5, 9, 30] {
        let oracle = StudentsT::new(0.0, 1.0, dof as f64).unwrap();
        for k in -100..=100 {
            let t = k as f64 / 10.0;
            let (a, b) = (student_t_pdf(t, dof), oracle.pdf(t));
            assert!((a - b).abs() <= 1e-12 * b, "dof {dof} t {t}: {a} vs {b}");
        }
    }
}

#[test]
fn tails_are_symmetric() {
    for dof in [1, 3, 9] {
        for t in [0.1, 1.0, 2.5, 10.0, 1e3] {
            let s = student_t_cdf(t, dof) + student_t_cdf(-t, dof);
            assert!((s - 1.0).abs() < 1e-15, "dof {dof} t {t}: {s}");
        }
    }
}
