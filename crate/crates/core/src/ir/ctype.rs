//! C-subset types and the interning table.

use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

use crate::term::{err, Term, TermResult, Textual};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeIdx(pub u32);

impl fmt::Display for TypeIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CType {
    Void,
    Int { bits: u8, signed: bool },
    Long { signed: bool },
    Float { bits: u8 },
    Pointer(TypeIdx),
    Struct(u32),
    Any64,
}

impl Textual for CType {
    fn to_term(&self) -> Term {
        let sign = |s: bool| Term::ident(if s { "signed" } else { "unsigned" });
        match self {
            CType::Void => Term::ident("Tvoid"),
            CType::Int { bits, signed } => {
                Term::app("Tint", vec![Term::Int(*bits as i64), sign(*signed)])
            }
            CType::Long { signed } => Term::app("Tlong", vec![sign(*signed)]),
            CType::Float { bits } => Term::app("Tfloat", vec![Term::Int(*bits as i64)]),
            CType::Pointer(t) => Term::app("Tpointer", vec![Term::TypeRef(t.0)]),
            CType::Struct(id) => Term::app("Tstruct", vec![Term::Int(*id as i64)]),
            CType::Any64 => Term::ident("Tany64"),
        }
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        let sign = |t: &Term| -> TermResult<bool> {
            match t.as_ident()? {
                "signed" => Ok(true),
                "unsigned" => Ok(false),
                other => err(format!("bad signedness `{other}`")),
            }
        };
        Ok(match t.as_app()? {
            ("Tvoid", []) => CType::Void,
            ("Tint", [b, s]) => CType::Int { bits: b.as_int()? as u8, signed: sign(s)? },
            ("Tlong", [s]) => CType::Long { signed: sign(s)? },
            ("Tfloat", [b]) => CType::Float { bits: b.as_int()? as u8 },
            ("Tpointer", [Term::TypeRef(i)]) => CType::Pointer(TypeIdx(*i)),
            ("Tstruct", [id]) => CType::Struct(id.as_int()? as u32),
            ("Tany64", []) => CType::Any64,
            _ => return err(format!("bad C type `{t}`")),
        })
    }
}

/// Record layout: ordered `(offset, type)` pairs; field names are `ofs_<offset>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructLayout {
    pub fields: Vec<(i64, TypeIdx)>,
    pub degenerate: bool,
}

impl StructLayout {
    pub fn new(mut fields: Vec<(i64, TypeIdx)>) -> StructLayout {
        fields.sort();
        fields.dedup_by_key(|f| f.0);
        let degenerate = fields.len() < 2;
        StructLayout { fields, degenerate }
    }

    pub fn field_name(ofs: i64) -> String {
        format!("ofs_{ofs}")
    }

    pub fn field_at(&self, ofs: i64) -> Option<TypeIdx> {
        self.fields.iter().find(|f| f.0 == ofs).map(|f| f.1)
    }
}

impl Textual for StructLayout {
    fn to_term(&self) -> Term {
        Term::app(
            "Layout",
            vec![
                Term::List(
                    self.fields
                        .iter()
                        .map(|(o, t)| Term::List(vec![Term::Int(*o), Term::TypeRef(t.0)]))
                        .collect(),
                ),
                Term::Int(self.degenerate as i64),
            ],
        )
    }

    fn from_term(t: &Term) -> TermResult<Self> {
        let (_, args) = t.args_of(2)?;
        let mut fields = Vec::new();
        for f in args[0].as_list()? {
            match f.as_list()? {
                [o, Term::TypeRef(i)] => fields.push((o.as_int()?, TypeIdx(*i))),
                _ => return err(format!("bad field `{f}`")),
            }
        }
        Ok(StructLayout { fields, degenerate: args[1].as_int()? != 0 })
    }
}

#[derive(Debug, Default, Clone)]
struct Inner {
    types: Vec<CType>,
    index: HashMap<CType, TypeIdx>,
    layouts: Vec<StructLayout>,
    layout_index: HashMap<StructLayout, u32>,
}

/// Interned C types. Interning takes a write lock, so concurrent callers see
/// a single insertion order.
#[derive(Debug)]
pub struct CTypeTable {
    inner: RwLock<Inner>,
}

impl Clone for CTypeTable {
    fn clone(&self) -> Self {
        CTypeTable { inner: RwLock::new(self.inner.read().unwrap().clone()) }
    }
}

impl PartialEq for CTypeTable {
    fn eq(&self, other: &Self) -> bool {
        let a = self.inner.read().unwrap();
        let b = other.inner.read().unwrap();
        a.types == b.types && a.layouts == b.layouts
    }
}

impl Default for CTypeTable {
    fn default() -> Self {
        Self::new()
    }
}

impl CTypeTable {
    pub const VOID: TypeIdx = TypeIdx(0);
    pub const INT: TypeIdx = TypeIdx(1);
    pub const UINT: TypeIdx = TypeIdx(2);
    pub const CHAR: TypeIdx = TypeIdx(3);
    pub const UCHAR: TypeIdx = TypeIdx(4);
    pub const SHORT: TypeIdx = TypeIdx(5);
    pub const USHORT: TypeIdx = TypeIdx(6);
    pub const LONG: TypeIdx = TypeIdx(7);
    pub const ULONG: TypeIdx = TypeIdx(8);
    pub const FLOAT: TypeIdx = TypeIdx(9);
    pub const DOUBLE: TypeIdx = TypeIdx(10);
    pub const ANY64: TypeIdx = TypeIdx(11);

    pub fn new() -> CTypeTable {
        let table = CTypeTable { inner: RwLock::new(Inner::default()) };
        for t in [
            CType::Void,
            CType::Int { bits: 32, signed: true },
            CType::Int { bits: 32, signed: false },
            CType::Int { bits: 8, signed: true },
            CType::Int { bits: 8, signed: false },
            CType::Int { bits: 16, signed: true },
            CType::Int { bits: 16, signed: false },
            CType::Long { signed: true },
            CType::Long { signed: false },
            CType::Float { bits: 32 },
            CType::Float { bits: 64 },
            CType::Any64,
        ] {
            table.intern(t);
        }
        table
    }

    pub fn intern(&self, t: CType) -> TypeIdx {
        if let Some(i) = self.inner.read().unwrap().index.get(&t) {
            return *i;
        }
        let mut inner = self.inner.write().unwrap();
        if let Some(i) = inner.index.get(&t) {
            return *i;
        }
        let i = TypeIdx(inner.types.len() as u32);
        inner.types.push(t);
        inner.index.insert(t, i);
        i
    }

    pub fn pointer(&self, t: TypeIdx) -> TypeIdx {
        self.intern(CType::Pointer(t))
    }

    /// Intern a struct layout and return the index of the struct type.
    pub fn intern_struct(&self, layout: StructLayout) -> TypeIdx {
        let id = {
            let mut inner = self.inner.write().unwrap();
            match inner.layout_index.get(&layout) {
                Some(id) => *id,
                None => {
                    let id = inner.layouts.len() as u32;
                    inner.layouts.push(layout.clone());
                    inner.layout_index.insert(layout, id);
                    id
                }
            }
        };
        self.intern(CType::Struct(id))
    }

    pub fn get(&self, i: TypeIdx) -> CType {
        self.inner.read().unwrap().types[i.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layout(&self, id: u32) -> StructLayout {
        self.inner.read().unwrap().layouts[id as usize].clone()
    }

    pub fn layouts(&self) -> Vec<StructLayout> {
        self.inner.read().unwrap().layouts.clone()
    }

    pub fn types(&self) -> Vec<CType> {
        self.inner.read().unwrap().types.clone()
    }

    /// Rebuild a table from dumped contents.
    pub fn from_parts(types: Vec<CType>, layouts: Vec<StructLayout>) -> CTypeTable {
        let index = types.iter().enumerate().map(|(i, t)| (*t, TypeIdx(i as u32))).collect();
        let layout_index =
            layouts.iter().enumerate().map(|(i, l)| (l.clone(), i as u32)).collect();
        CTypeTable { inner: RwLock::new(Inner { types, index, layouts, layout_index }) }
    }

    pub fn is_pointer(&self, t: TypeIdx) -> bool {
        matches!(self.get(t), CType::Pointer(_))
    }

    pub fn pointee(&self, t: TypeIdx) -> Option<TypeIdx> {
        match self.get(t) {
            CType::Pointer(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_integer(&self, t: TypeIdx) -> bool {
        matches!(self.get(t), CType::Int { .. } | CType::Long { .. } | CType::Any64)
    }

    pub fn is_float(&self, t: TypeIdx) -> bool {
        matches!(self.get(t), CType::Float { .. })
    }

    pub fn is_arith(&self, t: TypeIdx) -> bool {
        self.is_integer(t) || self.is_float(t)
    }

    pub fn is_signed(&self, t: TypeIdx) -> bool {
        match self.get(t) {
            CType::Int { signed, .. } | CType::Long { signed } => signed,
            CType::Any64 => true,
            _ => false,
        }
    }

    pub fn struct_layout(&self, t: TypeIdx) -> Option<StructLayout> {
        match self.get(t) {
            CType::Struct(id) => Some(self.layout(id)),
            _ => None,
        }
    }

    /// Layout of the struct a pointer type points to.
    pub fn pointee_layout(&self, t: TypeIdx) -> Option<(u32, StructLayout)> {
        match self.get(self.pointee(t)?) {
            CType::Struct(id) => Some((id, self.layout(id))),
            _ => None,
        }
    }

    pub fn size_of(&self, t: TypeIdx) -> i64 {
        match self.get(t) {
            CType::Void => 1,
            CType::Int { bits, .. } | CType::Float { bits } => bits as i64 / 8,
            CType::Long { .. } | CType::Pointer(_) | CType::Any64 => 8,
            CType::Struct(id) => {
                let l = self.layout(id);
                let end = l
                    .fields
                    .last()
                    .map(|(o, t)| o + self.size_of(*t))
                    .unwrap_or(0);
                let align = self.align_of(t);
                (end + align - 1) / align * align
            }
        }
    }

    pub fn align_of(&self, t: TypeIdx) -> i64 {
        match self.get(t) {
            CType::Struct(id) => self
                .layout(id)
                .fields
                .iter()
                .map(|(_, f)| self.align_of(*f))
                .max()
                .unwrap_or(1),
            _ => self.size_of(t),
        }
    }

    /// Integer type of a given byte width and signedness.
    pub fn int_of_size(size: i64, signed: bool) -> TypeIdx {
        match (size, signed) {
            (1, true) => Self::CHAR,
            (1, false) => Self::UCHAR,
            (2, true) => Self::SHORT,
            (2, false) => Self::USHORT,
            (4, true) => Self::INT,
            (4, false) => Self::UINT,
            (_, true) => Self::LONG,
            (_, false) => Self::ULONG,
        }
    }

    /// C spelling of the type used as a declaration prefix, e.g. `struct s0 *`.
    pub fn c_name(&self, t: TypeIdx) -> String {
        match self.get(t) {
            CType::Void => "void".into(),
            CType::Int { bits: 8, signed: true } => "char".into(),
            CType::Int { bits: 8, signed: false } => "unsigned char".into(),
            CType::Int { bits: 16, signed: true } => "short".into(),
            CType::Int { bits: 16, signed: false } => "unsigned short".into(),
            CType::Int { signed: true, .. } => "int".into(),
            CType::Int { signed: false, .. } => "unsigned int".into(),
            CType::Long { signed: true } | CType::Any64 => "long".into(),
            CType::Long { signed: false } => "unsigned long".into(),
            CType::Float { bits: 32 } => "float".into(),
            CType::Float { .. } => "double".into(),
            CType::Pointer(p) => format!("{} *", self.c_name(p)).replace("* *", "**"),
            CType::Struct(id) => format!("struct s{id}"),
        }
    }

    /// `T name` with the pointer star attached to the name.
    pub fn declare(&self, t: TypeIdx, name: &str) -> String {
        let ty = self.c_name(t);
        if ty.ends_with('*') {
            format!("{ty}{name}")
        } else {
            format!("{ty} {name}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_idempotent() {
        let t = CTypeTable::new();
        let a = t.intern(CType::Int { bits: 32, signed: true });
        assert_eq!(a, t.intern(CType::Int { bits: 32, signed: true }));
        assert_eq!(a, CTypeTable::INT);
        assert_ne!(t.pointer(CTypeTable::INT), t.pointer(CTypeTable::FLOAT));
    }

    #[test]
    fn running_example_struct() {
        let t = CTypeTable::new();
        let s = t.intern_struct(StructLayout::new(vec![(4, CTypeTable::FLOAT), (0, CTypeTable::INT)]));
        let layout = t.struct_layout(s).unwrap();
        let names: Vec<_> = layout.fields.iter().map(|f| StructLayout::field_name(f.0)).collect();
        assert_eq!(names, ["ofs_0", "ofs_4"]);
        assert!(!layout.degenerate);
        assert_eq!(t.size_of(s), 8);
        assert_eq!(t.declare(t.pointer(s), "p0"), "struct s0 *p0");
    }

    #[test]
    fn single_field_layout_is_degenerate() {
        assert!(StructLayout::new(vec![(0, CTypeTable::INT)]).degenerate);
    }

    #[test]
    fn ctype_text_round_trip() {
        for ty in [
            CType::Void,
            CType::Int { bits: 16, signed: false },
            CType::Long { signed: true },
            CType::Float { bits: 32 },
            CType::Pointer(TypeIdx(4)),
            CType::Struct(2),
            CType::Any64,
        ] {
            assert_eq!(CType::parse_text(&ty.render()).unwrap(), ty);
        }
    }
}
