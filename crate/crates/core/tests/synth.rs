use hippoprog::metrics::{concordance_index, pearson_r, TieRule};
use hippoprog::synth::{
    anterior_bump, bump_mask, generate, oracle_c_index, to_visit_grid, ClassCounts, GenConfig, SyntheticSubject,
};
use hippoprog::{Dims3, Label};

/// Outcome draws precede the volume noise in each subject's stream, so
/// severities, times and events do not depend on the grid size; small grids
/// keep outcome-only checks fast.
fn small(n: usize, seed: u64) -> GenConfig {
    GenConfig {
        n,
        seed,
        dims: Dims3::new(8, 6, 12),
        ..GenConfig::default()
    }
}

fn anterior_means(subjects: &[SyntheticSubject], dims: Dims3) -> Vec<f64> {
    let mask = bump_mask(dims);
    let count = mask.iter().filter(|&&m| m).count() as f64;
    subjects
        .iter()
        .map(|s| {
            let v = s.record.left.voxels();
            mask.iter()
                .zip(v)
                .filter(|(m, _)| **m)
                .map(|(_, &x)| x as f64)
                .sum::<f64>()
                / count
        })
        .collect()
}

#[test]
fn default_shape_contract() {
    let s = generate(&GenConfig {
        n: 10,
        seed: 42,
        ..GenConfig::default()
    })
    .unwrap();
    assert_eq!(s.len(), 10);
    for subj in &s {
        assert_eq!(subj.record.left.dims(), Dims3::new(29, 21, 55));
        assert_eq!(subj.record.right.dims(), Dims3::new(29, 21, 55));
        let t = subj.record.time.unwrap();
        assert_eq!(t % 6.0, 0.0);
        assert!(t >= 6.0);
        assert_eq!(subj.record.event.unwrap(), subj.latent_time <= subj.censor_time);
        assert!((12.0..=72.0).contains(&subj.censor_time));
        assert_eq!(subj.record.label, GenConfig::default().label_for(subj.severity));
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let cfg = small(30, 5);
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(a, b);
    let c = generate(&small(30, 6)).unwrap();
    assert_ne!(a[0].record.left, c[0].record.left);
}

#[test]
fn class_quotas_are_exact() {
    let cfg = GenConfig {
        counts: Some(ClassCounts { nc: 7, ad: 5, mci: 9 }),
        ..small(0, 3)
    };
    let s = generate(&cfg).unwrap();
    let count = |l| s.iter().filter(|x| x.record.label == l).count();
    assert_eq!((count(Label::Nc), count(Label::Ad), count(Label::Mci)), (7, 5, 9));
    for x in &s {
        let (lo, hi) = cfg.severity_range(x.record.label);
        assert!(x.severity >= lo && x.severity <= hi);
    }
}

#[test]
fn anterior_intensity_tracks_severity() {
    let dims = Dims3::new(29, 21, 55);
    let s = generate(&GenConfig {
        n: 500,
        seed: 1,
        ..GenConfig::default()
    })
    .unwrap();
    let sev: Vec<f64> = s.iter().map(|x| x.severity).collect();
    let r = pearson_r(&sev, &anterior_means(&s, dims)).unwrap();
    assert!(r < -0.8, "pearson {r}");
}

#[test]
fn zero_atrophy_removes_the_signal() {
    let dims = Dims3::new(29, 21, 55);
    let s = generate(&GenConfig {
        n: 500,
        seed: 2,
        atrophy: 0.0,
        ..GenConfig::default()
    })
    .unwrap();
    let sev: Vec<f64> = s.iter().map(|x| x.severity).collect();
    let r = pearson_r(&sev, &anterior_means(&s, dims)).unwrap();
    assert!(r.abs() < 0.1, "pearson {r}");
}

#[test]
fn event_fraction_is_interior() {
    for seed in 0..5 {
        let s = generate(&small(100, seed)).unwrap();
        let e = s.iter().filter(|x| x.record.event.unwrap()).count();
        assert!(e > 0 && e < 100, "seed {seed}: {e} events");
    }
}

#[test]
fn null_hazard_gives_chance_concordance() {
    let s = generate(&GenConfig {
        theta: 0.0,
        ..small(1000, 11)
    })
    .unwrap();
    let c = oracle_c_index(&s, TieRule::Half).unwrap();
    assert!((c - 0.5).abs() < 0.05, "c {c}");
}

#[test]
fn steep_hazard_gives_near_perfect_oracle() {
    let s = generate(&GenConfig {
        theta: 25.0,
        ..small(1000, 12)
    })
    .unwrap();
    let c = oracle_c_index(&s, TieRule::Strict).unwrap();
    assert!(c > 0.95, "c {c}");
}

#[test]
fn pinned_reference_oracle() {
    // theta 2.5, n 1000, seed 7; both tie rules agree (severities are distinct).
    let s = generate(&GenConfig {
        theta: 2.5,
        ..small(1000, 7)
    })
    .unwrap();
    let strict = oracle_c_index(&s, TieRule::Strict).unwrap();
    assert!((strict - 0.702175).abs() < 5e-7, "oracle {strict}");
    assert_eq!(strict, oracle_c_index(&s, TieRule::Half).unwrap());
    let risks: Vec<f64> = s.iter().map(|x| x.severity).collect();
    let times: Vec<f64> = s.iter().map(|x| x.record.time.unwrap()).collect();
    let events: Vec<bool> = s.iter().map(|x| x.record.event.unwrap()).collect();
    assert_eq!(
        concordance_index(&risks, &times, &events, TieRule::Strict)
            .unwrap()
            .c_index,
        strict
    );
}

#[test]
fn bump_lies_in_the_anterior_third() {
    let dims = Dims3::new(29, 21, 55);
    let mask = bump_mask(dims);
    let bump = anterior_bump(dims);
    assert!(mask.iter().any(|&m| m));
    for z in 0..dims.z {
        for y in 0..dims.y {
            for x in 0..dims.x {
                let i = dims.index(x, y, z);
                if mask[i] {
                    // Ellipsoid spans z in [5, 49]; its first third ends near 19.7.
                    assert!((5..20).contains(&z), "z {z}");
                }
                assert!((0.0..=1.0).contains(&bump[i]));
            }
        }
    }
}

#[test]
fn visit_grid_rounds_up() {
    assert_eq!(to_visit_grid(0.1), 6.0);
    assert_eq!(to_visit_grid(6.0), 6.0);
    assert_eq!(to_visit_grid(6.01), 12.0);
    assert_eq!(to_visit_grid(71.9), 72.0);
}

#[test]
fn invalid_config_is_rejected() {
    assert!(generate(&GenConfig {
        nc_threshold: 0.8,
        ..small(5, 0)
    })
    .is_err());
    assert!(generate(&GenConfig {
        noise_std: 0.0,
        ..small(5, 0)
    })
    .is_err());
}
