use darkdepth::imagery::BinaryMask;
use darkdepth::navigation::{potential_field_cmd, NavConfig};
use proptest::prelude::*;

const W: usize = 24;
const H: usize = 16;

fn mask(bits: &[bool]) -> BinaryMask {
    BinaryMask::from_vec(W, H, bits.to_vec()).unwrap()
}

fn flip_vertical(m: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(W, H, |x, y| m.get(x, H - 1 - y))
}

/// Centroid exactly at the image center, where the tie-break breaks the
/// symmetry on purpose.
fn centered(m: &BinaryMask) -> bool {
    let (mut n, mut sx, mut sy) = (0i64, 0i64, 0i64);
    for y in 0..H {
        for x in 0..W {
            if m.get(x, y) {
                n += 1;
                sx += x as i64;
                sy += y as i64;
            }
        }
    }
    2 * sx == n * (W as i64 - 1) && 2 * sy == n * (H as i64 - 1)
}

proptest! {
    #[test]
    fn mirrored_masks_mirror_the_command(bits in prop::collection::vec(any::<bool>(), W * H)) {
        let m = mask(&bits);
        prop_assume!(!centered(&m));
        let cfg = NavConfig::default();
        let a = potential_field_cmd(&m, &cfg);
        let b = potential_field_cmd(&m.flip_horizontal(), &cfg);
        prop_assert_eq!(a.v_forward, b.v_forward);
        prop_assert!((a.v_lateral + b.v_lateral).abs() < 1e-12);
        prop_assert!((a.v_vertical - b.v_vertical).abs() < 1e-12);
        let c = potential_field_cmd(&flip_vertical(&m), &cfg);
        prop_assert!((a.v_vertical + c.v_vertical).abs() < 1e-12);
        prop_assert!((a.v_lateral - c.v_lateral).abs() < 1e-12);
    }

    #[test]
    fn more_foreground_never_speeds_up(
        bits in prop::collection::vec(any::<bool>(), W * H),
        extra in prop::collection::vec(0..W * H, 1..40),
    ) {
        let cfg = NavConfig::default();
        let m = mask(&bits);
        let mut grown = bits.clone();
        for i in extra {
            grown[i] = true;
        }
        let a = potential_field_cmd(&m, &cfg);
        let b = potential_field_cmd(&mask(&grown), &cfg);
        prop_assert!(b.v_forward <= a.v_forward);
    }

    #[test]
    fn commands_respect_limits(bits in prop::collection::vec(any::<bool>(), W * H)) {
        let cfg = NavConfig::default();
        let c = potential_field_cmd(&mask(&bits), &cfg);
        prop_assert!(c.v_lateral.abs() <= cfg.max_lateral);
        prop_assert!(c.v_vertical.abs() <= cfg.max_vertical);
        prop_assert!(c.v_forward >= cfg.creep_fraction * cfg.forward_speed - 1e-12);
        prop_assert!(c.v_forward <= cfg.forward_speed);
    }
}
