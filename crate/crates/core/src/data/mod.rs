//! Dataset generation, file I/O, non-IID partitioning, and local splits.

mod dataset;
mod io;
mod partition;
mod split;
mod synthetic;

pub use dataset::{ClientDataset, Dataset};
pub use io::{
    load_any_dataset, load_csv_dataset, load_dataset, parse_csv_dataset, parse_dataset,
    save_dataset, MAGIC,
};
pub use partition::{dirichlet_partition, partition_indices};
pub use split::{split_local, split_local_with_rng};
pub use synthetic::{generate_synthetic, generate_synthetic_holdout};
