use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataflowKind {
    GatherGemmScatter,
    FetchOnDemand,
    ImplicitGemm,
}

impl DataflowKind {
    pub fn name(self) -> &'static str {
        match self {
            DataflowKind::GatherGemmScatter => "gather_gemm_scatter",
            DataflowKind::FetchOnDemand => "fetch_on_demand",
            DataflowKind::ImplicitGemm => "implicit_gemm",
        }
    }

    /// Whether the dataflow consumes pair lists (weight-stationary maps).
    pub fn uses_ws_map(self) -> bool {
        !matches!(self, DataflowKind::ImplicitGemm)
    }
}

impl fmt::Display for DataflowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// When the output-stationary map is split, sorted and padded: ahead of time
/// during map construction, or inside the convolution call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reorder {
    #[default]
    Offline,
    Online,
}

/// Tile sizes of the implicit GEMM kernel and the lockstep width of the cost
/// model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TilePreset {
    pub cta_m: usize,
    pub cta_n: usize,
    pub cta_k: usize,
    /// Rows processed in lockstep (warp width) by the cost model.
    pub warp_rows: usize,
    /// Feature elements loaded per thread per step.
    pub load_width: usize,
}

impl TilePreset {
    pub const SMALL: TilePreset = TilePreset {
        cta_m: 32,
        cta_n: 16,
        cta_k: 16,
        warp_rows: 8,
        load_width: 4,
    };
    pub const LARGE: TilePreset = TilePreset {
        cta_m: 64,
        cta_n: 32,
        cta_k: 32,
        warp_rows: 8,
        load_width: 8,
    };

    pub fn name(&self) -> Option<&'static str> {
        if *self == Self::SMALL {
            Some("small")
        } else if *self == Self::LARGE {
            Some("large")
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.cta_m, self.cta_n, self.cta_k, self.warp_rows, self.load_width].contains(&0) {
            return Err(invalid!("tile fields must be positive: {self:?}"));
        }
        if !self.cta_m.is_multiple_of(self.warp_rows) {
            return Err(invalid!("cta_m {} is not a multiple of warp_rows {}", self.cta_m, self.warp_rows));
        }
        Ok(())
    }
}

impl Default for TilePreset {
    fn default() -> Self {
        Self::SMALL
    }
}

fn yes() -> bool {
    true
}

/// One point of the dataflow design space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataflowConfig {
    pub kind: DataflowKind,
    /// Mask splits for implicit GEMM; 0 runs unsorted. Ignored by the other
    /// dataflows.
    #[serde(default)]
    pub splits: u32,
    #[serde(default)]
    pub tile: TilePreset,
    #[serde(default)]
    pub reorder: Reorder,
    #[serde(default = "yes")]
    pub deterministic: bool,
}

impl DataflowConfig {
    pub fn new(kind: DataflowKind) -> Self {
        Self {
            kind,
            splits: 0,
            tile: TilePreset::SMALL,
            reorder: Reorder::Offline,
            deterministic: true,
        }
    }

    pub fn gather_gemm_scatter() -> Self {
        Self::new(DataflowKind::GatherGemmScatter)
    }

    pub fn fetch_on_demand() -> Self {
        Self::new(DataflowKind::FetchOnDemand)
    }

    pub fn implicit_gemm(splits: u32, tile: TilePreset) -> Self {
        Self {
            splits,
            tile,
            ..Self::new(DataflowKind::ImplicitGemm)
        }
    }

    pub fn with_reorder(mut self, reorder: Reorder) -> Self {
        self.reorder = reorder;
        self
    }

    pub fn with_deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    /// Mask splits the executor actually runs (at least one).
    pub fn effective_splits(&self) -> usize {
        match self.kind {
            DataflowKind::ImplicitGemm => (self.splits as usize).max(1),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tile.validate()
    }

    /// Short label such as `implicit_gemm/s2/large`.
    pub fn label(&self) -> String {
        let tile = self.tile.name().map_or_else(|| format!("{}x{}x{}", self.tile.cta_m, self.tile.cta_n, self.tile.cta_k), str::to_string);
        match self.kind {
            DataflowKind::ImplicitGemm => {
                let online = if self.reorder == Reorder::Online { "/online" } else { "" };
                format!("{}/s{}/{tile}{online}", self.kind, self.splits)
            }
            _ => format!("{}/{tile}", self.kind),
        }
    }
}

impl Default for DataflowConfig {
    fn default() -> Self {
        Self::gather_gemm_scatter()
    }
}
