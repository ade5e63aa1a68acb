//! Config and writer invariants.

use ahpl_core::ahpl::Grid;
use ahpl_lab::config::CertifyMode;
use ahpl_lab::output::{csv_bytes, pixel_of, ppm_bytes};
use ahpl_lab::ExperimentConfig;
use proptest::prelude::*;

proptest! {
    #[test]
    fn valid_configs_round_trip(
        depth in 2usize..20,
        res in 1usize..2048,
        seed in any::<u64>(),
        theta in 0.01f64..0.3,
        full in any::<bool>(),
    ) {
        let cfg = ExperimentConfig {
            depth,
            level: depth / 2,
            extend_level: depth / 2,
            resolution: res,
            seed,
            theta,
            certify_mode: if full { CertifyMode::Full } else { CertifyMode::Threshold },
            ..ExperimentConfig::default()
        };
        if cfg.validate().is_ok() {
            prop_assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn csv_has_one_line_per_row(rows in proptest::collection::vec((any::<i32>(), -1e9f64..1e9), 0..40)) {
        let body: Vec<Vec<String>> = rows.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect();
        let text = String::from_utf8(csv_bytes(&["a", "b"], &body)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        prop_assert_eq!(lines.len(), rows.len() + 2);
        for (line, (a, b)) in lines[2..].iter().zip(&rows) {
            let (x, y) = line.split_once(',').unwrap();
            prop_assert_eq!(x.parse::<i32>().unwrap(), *a);
            prop_assert_eq!(y.parse::<f64>().unwrap(), *b);
        }
    }

    #[test]
    fn ppm_length_matches_dimensions(w in 1usize..50, h in 1usize..50) {
        let b = ppm_bytes(w, h, &vec![7; 3 * w * h]);
        let head = format!("P6\n# schema_version 1\n{w} {h}\n255\n");
        prop_assert_eq!(b.len(), head.len() + 3 * w * h);
    }

    #[test]
    fn pixel_of_inverts_point(nx in 2usize..300, ny in 2usize..300, fi in 0.0f64..1.0, fj in 0.0f64..1.0) {
        let g = Grid::covering(2.5, nx, ny);
        let (i, j) = ((fi * (nx - 1) as f64) as usize, (fj * (ny - 1) as f64) as usize);
        prop_assert_eq!(pixel_of(&g, g.point(i, j)), Some((i, j)));
    }
}
