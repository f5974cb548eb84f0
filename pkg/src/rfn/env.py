"""Lookup tables over merged modules: members, classes, types, imports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .resolve import ImportBinding
from .syntax import ast as A


@dataclass(eq=False)
class ClassInfo:
    module: str
    decl: A.ClassDecl
    fields: dict = field(default_factory=dict)
    members: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def qualified(self) -> str:
        return f"{self.module}.{self.decl.name}"

    def __repr__(self) -> str:
        return f"ClassInfo({self.qualified})"


@dataclass(eq=False)
class ModuleInfo:
    name: str
    decl: A.ModuleDecl
    members: dict = field(default_factory=dict)  # functions / methods / lemmas
    classes: dict = field(default_factory=dict)
    types: dict = field(default_factory=dict)
    imports: dict = field(default_factory=dict)  # local name -> ImportBinding
    ctors: dict = field(default_factory=dict)  # datatype constructor -> (TypeDecl, Ctor)


# resolved types: ("int",) ("bool",) ("object",) ("set", t) ("seq", t)
# ("class", ClassInfo) ("datatype", module, TypeDecl) ("opaque", module, name)
INT_T = ("int",)
BOOL_T = ("bool",)
OBJECT_T = ("object",)


class ProgramEnv:
    """Name lookup across merged modules. `mode` picks which target an `as ... default` import denotes."""

    def __init__(self, merged: dict, mode: str = "verify"):
        self.mode = mode
        self.modules: dict = {}
        for name, m in merged.items():
            decl = m.module if hasattr(m, "module") else m
            self.modules[name] = self._index(decl)

    @staticmethod
    def _index(decl: A.ModuleDecl) -> ModuleInfo:
        info = ModuleInfo(decl.name, decl)
        for d in decl.decls:
            if isinstance(d, A.ImportDecl):
                info.imports[d.name] = ImportBinding.of(d)
            elif isinstance(d, A.TypeDecl):
                info.types[d.name] = d
                for c in d.ctors:
                    info.ctors[c.name] = (d, c)
            elif isinstance(d, A.ClassDecl):
                ci = ClassInfo(decl.name, d)
                for m in d.members:
                    if isinstance(m, A.FieldDecl):
                        ci.fields[m.name] = m
                    else:
                        ci.members[A.member_key(m)] = m
                info.classes[d.name] = ci
            else:
                info.members[A.member_key(d)] = d
        return info

    def module(self, name: str) -> ModuleInfo:
        return self.modules[name]

    def imported(self, info: ModuleInfo, local: str) -> Optional[ModuleInfo]:
        b = info.imports.get(local)
        if b is None:
            return None
        target = b.compiler_target() if self.mode == "compile" else b.verifier_target()
        return self.modules.get(target)

    def split(self, info: ModuleInfo, dotted: str):
        """Follow import qualifiers: `C.Counter` -> (module of C, "Counter")."""
        parts = dotted.split(".")
        cur = info
        for q in parts[:-1]:
            nxt = self.imported(cur, q)
            if nxt is None:
                return None, parts[-1]
            cur = nxt
        return cur, parts[-1]

    def lookup_class(self, info: ModuleInfo, name: str) -> Optional[ClassInfo]:
        mod, last = self.split(info, name)
        return mod.classes.get(last) if mod is not None else None

    def lookup_type(self, info: ModuleInfo, name: str):
        mod, last = self.split(info, name)
        if mod is None:
            return None
        return mod.types.get(last) or mod.classes.get(last)

    def lookup_member(self, info: ModuleInfo, cls: Optional[ClassInfo], name: str):
        if cls is not None:
            if name in cls.fields:
                return cls.fields[name]
            if name in cls.members:
                return cls.members[name]
        return info.members.get(name)

    def lookup_datatype_ctor(self, info: ModuleInfo, name: str):
        mod, last = self.split(info, name)
        if mod is None:
            return None
        return mod.ctors.get(last)

    def visible_modules(self, info: ModuleInfo) -> list:
        out, seen = [], set()
        stack = [info]
        while stack:
            m = stack.pop()
            if m.name in seen:
                continue
            seen.add(m.name)
            out.append(m)
            for local in m.imports:
                t = self.imported(m, local)
                if t is not None:
                    stack.append(t)
        return out

    def any_class_has(self, info: ModuleInfo, member: str) -> bool:
        for m in self.visible_modules(info):
            for ci in m.classes.values():
                if member in ci.fields or member in ci.members:
                    return True
        return False

    def resolve_type(self, info: ModuleInfo, t: Optional[A.TypeRef], depth: int = 0):
        if t is None:
            return None
        if t.name == "int":
            return INT_T
        if t.name == "bool":
            return BOOL_T
        if t.name == "object":
            return OBJECT_T
        if t.name in ("set", "seq"):
            return (t.name, self.resolve_type(info, t.args[0], depth + 1))
        mod, last = self.split(info, t.name)
        if mod is None or depth > 20:
            return ("opaque", info.name, t.name)
        if last in mod.classes:
            return ("class", mod.classes[last])
        d = mod.types.get(last)
        if d is None:
            return ("opaque", mod.name, last)
        if d.form == "synonym":
            return self.resolve_type(mod, d.synonym, depth + 1)
        if d.form == "datatype":
            return ("datatype", mod.name, d)
        return ("opaque", mod.name, last)

    def owner_module(self, info: ModuleInfo, ci: ClassInfo) -> ModuleInfo:
        return self.modules[ci.module]
