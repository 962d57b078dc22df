//! Canonical JSON: struct field order as declared, maps in key order, and
//! floats written with at most 9 fraction digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

/// Fraction digits kept for floating-point numbers.
pub const FRACTION_DIGITS: usize = 9;

/// Format a float with at most [`FRACTION_DIGITS`] fraction digits, trailing
/// zeros trimmed but always keeping one fraction digit.
pub fn format_f64(value: f64) -> String {
    if !value.is_finite() {
        return "null".to_owned();
    }
    let mut s = format!("{value:.prec$}", prec = FRACTION_DIGITS);
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".to_owned();
    }
    s
}

struct Canonical<F>(F);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Canonical<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    forward! {
        begin_array(); end_array();
        begin_array_value(first: bool); end_array_value();
        begin_object(); end_object();
        begin_object_key(first: bool); end_object_key();
        begin_object_value(); end_object_value();
    }
}

pub fn to_vec<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Canonical(CompactFormatter));
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    out
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(to_vec(value)).expect("serde_json emits UTF-8")
}

pub fn to_string_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, Canonical(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}
