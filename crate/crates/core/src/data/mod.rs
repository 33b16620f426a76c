//! Dataset parsing, feature encoding and fold assignment.

mod efstats;
mod features;
mod folds;
mod income;
mod movielens;
mod ratings;

pub use efstats::{EfStats, RatingStats};
pub use features::{
    build_base_features, extend_features, ColumnScaler, EncodingReport, FeatureSchema,
    FeatureTable, SCHEMA_VERSION,
};
pub use folds::{make_folds, FoldAssignment};
pub use income::{IncomeTable, ZipMatch, INCOME_HEADER};
pub use movielens::{
    decode_latin1, load_movielens, parse_items, parse_ratings, parse_release_year, parse_users,
    parse_vocabulary, Gender, ItemProfile, RatingRecord, RatingScale, RawDataset, UserProfile,
};
pub use ratings::{Entry, IdIndex, RatingTable};
