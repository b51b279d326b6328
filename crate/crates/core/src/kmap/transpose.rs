use crate::kmap::{os_to_ws, ws_to_os, KernelMapOS, KernelMapWS, Pair};
use crate::Result;

/// Swaps input/output roles and mirrors offsets (`δ -> -δ`). The result is
/// the map of the transposed convolution; applying it twice returns the
/// original (pairs ordered by output row). Relations of graph maps keep
/// their index.
pub fn transpose_ws(map: &KernelMapWS) -> KernelMapWS {
    let v = map.volume();
    let mut pairs: Vec<Vec<Pair>> = vec![Vec::new(); v];
    for (k, list) in map.all_pairs().iter().enumerate() {
        let dst = &mut pairs[if map.relational() { k } else { v - 1 - k }];
        dst.extend(list.iter().map(|p| Pair::new(p.output, p.input)));
        dst.sort_unstable_by_key(|p| (p.output, p.input));
    }
    KernelMapWS::from_parts(map.n_out(), map.n_in(), pairs, map.relational())
}

/// Output-stationary transpose. The result is a raw (unsplit, unsorted) map
/// whatever the preparation state of the input.
pub fn transpose_os(map: &KernelMapOS) -> Result<KernelMapOS> {
    let t = transpose_ws(&os_to_ws(map));
    ws_to_os(&t, t.n_out())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmap::{build_kmap_os, build_kmap_ws, split_and_sort, OffsetSet};
    use crate::tensor::{Coord, CoordSet};

    #[test]
    fn center_only_map_is_self_transpose() {
        let mut pairs = vec![Vec::new(); 9];
        pairs[4] = vec![Pair::new(0, 0), Pair::new(1, 1)];
        let m = KernelMapWS::new(2, 2, pairs).unwrap();
        assert_eq!(transpose_ws(&m), m);
    }

    #[test]
    fn involution_on_toy() {
        let t = crate::toy::instance();
        let ws = t.map_ws();
        assert_eq!(transpose_ws(&transpose_ws(&ws)), ws);
        let os = t.map_os();
        assert_eq!(transpose_os(&transpose_os(&os).unwrap()).unwrap(), os);
        // Prepared maps transpose to the same raw map.
        let sorted = split_and_sort(&os, 3).unwrap();
        assert_eq!(transpose_os(&sorted).unwrap(), transpose_os(&os).unwrap());
    }

    #[test]
    fn transposed_submanifold_map_matches_swapped_build() {
        let a = CoordSet::new(2, [1; 3], vec![Coord::new2(0, 0), Coord::new2(1, 0), Coord::new2(1, 1)]).unwrap();
        let b = CoordSet::new(2, [1; 3], vec![Coord::new2(1, 1), Coord::new2(0, 1)]).unwrap();
        let off = OffsetSet::new(2, 3).unwrap();
        let fwd = build_kmap_ws(&a, &b, [1; 3], &off).unwrap();
        let back = build_kmap_ws(&b, &a, [1; 3], &off).unwrap();
        assert_eq!(transpose_ws(&fwd), back);
        let fwd_os = build_kmap_os(&a, &b, [1; 3], &off).unwrap();
        assert_eq!(transpose_os(&fwd_os).unwrap(), build_kmap_os(&b, &a, [1; 3], &off).unwrap());
    }
}
