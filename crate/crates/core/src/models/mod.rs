//! Network specs, construction, accounting, serialization and prediction.

mod accounting;
mod io;
mod netspec;
mod network;
mod predict;

pub use accounting::{
    blob_rows, count_parameters, estimate_memory, group_digits, render_table, BlobRow,
    LayerParamCount, MemoryEstimate, ParamCounts, BYTES_PER_VALUE,
};
pub use io::{import_external_weights, load_model, read_model, save_model, write_model, MAGIC, VERSION};
pub use netspec::{
    deep_spec, preset, shallow_spec, NetSpec, OutputKind, ShallowConfig, ShallowVariant,
    DEEP_DEFAULT_TEXT, PRESET_NAMES, SHALLOW_ISUN_TEXT, SHALLOW_SALICON_TEXT,
};
pub use network::{ForwardTrace, Gradients, InitScheme, Network};
pub use predict::{predict, predict_sample, PostProcess};
