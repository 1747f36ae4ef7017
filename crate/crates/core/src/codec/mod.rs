//! Serialization of event streams: the bit-exact EVT1 binary container and a
//! plain CSV interchange format.

mod csv;
pub mod evt1;

pub use self::csv::{read_csv, write_csv, CsvError, HEADER as CSV_HEADER};
pub use evt1::{decode as decode_evt1, encode as encode_evt1, encoded_len, Evt1Error};
