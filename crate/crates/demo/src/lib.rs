//! WebAssembly bindings for the browser demo in `www/`. Every export takes
//! plain numbers or strings and returns a JSON document; the page does the
//! drawing.

use serde_json::{json, Value};
use sparsekit::cost::count_macs;
use sparsekit::gen::{gen_cloud, CloudKind};
use sparsekit::kmap::{build_kmap_os, split_and_sort, SENTINEL};
use sparsekit::{quantize, toy, CoordSet, DedupRule, KernelMapOS, OffsetSet, VoxelParams};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

/// Largest cloud the page may request; keeps a sweep well under a second.
pub const MAX_POINTS: usize = 50_000;

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Rows of every split in execution order, with warp blocks marked.
fn map_layout(map: &KernelMapOS, warp: usize) -> Value {
    let splits: Vec<Value> = map
        .splits()
        .iter()
        .map(|s| {
            let rows: Vec<Value> = (0..s.rows())
                .map(|r| {
                    let nbrs: Vec<Option<i32>> = s.row(r).iter().map(|&e| (e != SENTINEL).then_some(e)).collect();
                    json!({ "out": s.out_row(r), "nbrs": nbrs })
                })
                .collect();
            // A (warp block, offset) cell is charged for all `warp` lanes as
            // soon as one lane has a neighbor there.
            let charged: Vec<Vec<bool>> = (0..s.rows())
                .step_by(warp)
                .map(|start| {
                    let end = (start + warp).min(s.rows());
                    (0..s.width()).map(|k| (start..end).any(|r| s.entry(r, k) != SENTINEL)).collect()
                })
                .collect();
            json!({ "first_offset": s.offsets().start, "width": s.width(), "rows": rows, "charged": charged })
        })
        .collect();
    Value::Array(splits)
}

pub fn toy_map_json(splits: usize, warp: usize) -> Result<Value> {
    let inst = toy::instance();
    let warp = warp.max(1);
    let map = split_and_sort(&inst.map_os(), splits)?;
    let macs = count_macs(&map, warp, 1, 1);
    let pts = |s: &CoordSet| s.coords().iter().map(|c| [c.xyz[0], c.xyz[1]]).collect::<Vec<_>>();
    let offsets: Vec<[i32; 2]> = inst.offsets.offsets().iter().map(|o| [o[0], o[1]]).collect();
    Ok(json!({
        "inputs": pts(&inst.input),
        "outputs": pts(&inst.output),
        "offsets": offsets,
        "warp": warp,
        "effective": macs.effective,
        "redundant": macs.redundant,
        "splits": map_layout(&map, warp),
    }))
}

/// Redundant MACs of one kernel map at every split count.
pub fn split_sweep_json(kind: &str, n: usize, seed: u64, voxel: f64, warp: usize, max_splits: usize) -> Result<Value> {
    let map = cloud_map(kind, n, seed, voxel)?;
    let warp = warp.max(1);
    let mut rows = Vec::new();
    for s in 0..=max_splits.min(map.volume()) {
        let m = count_macs(&split_and_sort(&map, s)?, warp, 1, 1);
        rows.push(json!({ "splits": s, "effective": m.effective, "redundant": m.redundant }));
    }
    Ok(json!({
        "voxels": map.n_out(),
        "pairs": map.neighbor_count(),
        "neighbor_ratio": map.neighbor_count() as f64 / map.n_out().max(1) as f64,
        "rows": rows,
    }))
}

/// Voxel centers of a generated cloud with their submanifold neighbor counts.
pub fn cloud_view_json(kind: &str, n: usize, seed: u64, voxel: f64) -> Result<Value> {
    let map = cloud_map(kind, n, seed, voxel)?;
    let counts: Vec<usize> = (0..map.n_out()).map(|r| map.splits()[0].row(r).iter().filter(|&&e| e != SENTINEL).count()).collect();
    let coords = voxel_set(kind, n, seed, voxel)?;
    let xyz: Vec<[i32; 3]> = coords.coords().iter().map(|c| c.xyz).collect();
    Ok(json!({ "voxel": voxel, "xyz": xyz, "neighbors": counts }))
}

fn voxel_set(kind: &str, n: usize, seed: u64, voxel: f64) -> Result<std::sync::Arc<CoordSet>> {
    let kind: CloudKind = kind.parse()?;
    let n = n.clamp(1, MAX_POINTS);
    let raw: Vec<f64> = gen_cloud(kind, n, seed, 8.0).into_iter().flatten().collect();
    let t = quantize::<f32>(&raw, None, &VoxelParams::uniform(3, voxel)?, DedupRule::First)?;
    Ok(t.coord_set().clone())
}

/// Raw 3x3x3 submanifold map of a generated cloud.
fn cloud_map(kind: &str, n: usize, seed: u64, voxel: f64) -> Result<KernelMapOS> {
    let set = voxel_set(kind, n, seed, voxel)?;
    Ok(build_kmap_os(&set, &set, [1; 3], &OffsetSet::new(3, 3)?)?)
}

#[wasm_bindgen]
pub fn toy_map(splits: u32, warp: u32) -> std::result::Result<String, JsError> {
    to_js(toy_map_json(splits as usize, warp as usize))
}

#[wasm_bindgen]
pub fn split_sweep(kind: &str, n: u32, seed: u32, voxel: f64, warp: u32, max_splits: u32) -> std::result::Result<String, JsError> {
    to_js(split_sweep_json(kind, n as usize, seed.into(), voxel, warp as usize, max_splits as usize))
}

#[wasm_bindgen]
pub fn cloud_view(kind: &str, n: u32, seed: u32, voxel: f64) -> std::result::Result<String, JsError> {
    to_js(cloud_view_json(kind, n as usize, seed.into(), voxel))
}
