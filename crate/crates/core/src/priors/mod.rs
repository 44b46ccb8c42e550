//! Prior banks: seen-category priors chosen by mean-shift, and
//! category-specific priors built from least-overlapping partial scans.

mod bank;
mod mean_shift;

pub use bank::{
    build_category_prior_bank, build_seen_prior_bank, embed_shape, load_bank, ranked_pairs, save_bank,
    BankKind, PartialPair, PriorBank, BANK_MANIFEST, DEFAULT_BANK_SIZE, EMBED_SIDE, MAX_SEEDS,
};
pub use mean_shift::{mean_shift, mean_shift_seeded, ClusterResult};
