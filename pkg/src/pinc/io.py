"""Point cloud and mesh file formats (XYZ, PLY, OBJ) and atomic writes."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


_UMASK = os.umask(0)
os.umask(_UMASK)


class ParseError(ValueError):
    pass


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def read_xyz(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Whitespace separated rows of 3 (positions) or 6 (plus normals) floats."""
    rows = []
    ncols = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.replace(",", " ").split()
            if len(parts) not in (3, 6):
                raise ParseError(f"{path}:{lineno}: expected 3 or 6 values, got {len(parts)}")
            if ncols is None:
                ncols = len(parts)
            elif len(parts) != ncols:
                raise ParseError(f"{path}:{lineno}: inconsistent column count")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no points")
    data = np.asarray(rows, dtype=np.float64)
    return data[:, :3].copy(), (data[:, 3:6].copy() if ncols == 6 else None)


def write_xyz(path, points: np.ndarray, normals: np.ndarray | None = None) -> None:
    data = points if normals is None else np.hstack([points, normals])
    lines = [" ".join(f"{v:.17g}" for v in row) for row in data]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply_header(fh, path):
    first = fh.readline()
    if first.strip() != b"ply":
        raise ParseError(f"{path}:1: missing 'ply' magic")
    fmt = None
    elements = []  # [name, count, [(prop, type) | (prop, ('list', ctype, itype))]]
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise ParseError(f"{path}:{lineno}: header not terminated")
        tokens = raw.decode("ascii", "replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "end_header":
            break
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append([tokens[1], int(tokens[2]), []])
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"{path}:{lineno}: property before element")
            if tokens[1] == "list":
                elements[-1][2].append((tokens[4], ("list", tokens[2], tokens[3])))
            else:
                if tokens[1] not in _PLY_TYPES:
                    raise ParseError(f"{path}:{lineno}: unknown property type {tokens[1]}")
                elements[-1][2].append((tokens[2], tokens[1]))
        else:
            raise ParseError(f"{path}:{lineno}: unexpected header line")
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"{path}: unsupported PLY format {fmt!r}")
    return fmt, elements, lineno


def read_ply(path) -> dict:
    """Read vertices (x, y, z, optional nx, ny, nz) and faces from a PLY file."""
    with open(path, "rb") as fh:
        fmt, elements, lineno = _parse_ply_header(fh, path)
        body = fh.read()
    result: dict = {"points": None, "normals": None, "faces": None}
    if fmt == "ascii":
        lines = body.decode("ascii", "replace").splitlines()
        cursor = 0
        for name, count, props in elements:
            records = []
            for _ in range(count):
                while cursor < len(lines) and not lines[cursor].strip():
                    cursor += 1
                if cursor >= len(lines):
                    raise ParseError(f"{path}:{lineno + cursor + 1}: unexpected end of data")
                toks = lines[cursor].split()
                here = lineno + cursor + 1
                cursor += 1
                rec, pos = {}, 0
                try:
                    for pname, ptype in props:
                        if isinstance(ptype, tuple):
                            n = int(toks[pos])
                            rec[pname] = [int(float(t)) for t in toks[pos + 1 : pos + 1 + n]]
                            if len(rec[pname]) != n:
                                raise IndexError
                            pos += 1 + n
                        else:
                            rec[pname] = float(toks[pos])
                            pos += 1
                except (IndexError, ValueError):
                    raise ParseError(f"{path}:{here}: malformed {name} record") from None
                records.append(rec)
            _collect(result, name, props, records)
    else:
        endian = "<" if fmt == "binary_little_endian" else ">"
        offset = 0
        for name, count, props in elements:
            if all(not isinstance(t, tuple) for _, t in props):
                dt = np.dtype([(pn, endian + _PLY_TYPES[pt]) for pn, pt in props])
                need = dt.itemsize * count
                if offset + need > len(body):
                    raise ParseError(f"{path}: truncated binary element '{name}'")
                arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
                offset += need
                records = [{pn: arr[pn][k] for pn, _ in props} for k in range(count)] if name != "vertex" else arr
            else:
                records = []
                for _ in range(count):
                    rec = {}
                    for pname, ptype in props:
                        try:
                            if isinstance(ptype, tuple):
                                cdt = np.dtype(endian + _PLY_TYPES[ptype[1]])
                                idt = np.dtype(endian + _PLY_TYPES[ptype[2]])
                                n = int(np.frombuffer(body, cdt, 1, offset)[0])
                                offset += cdt.itemsize
                                rec[pname] = np.frombuffer(body, idt, n, offset).tolist()
                                offset += idt.itemsize * n
                            else:
                                sdt = np.dtype(endian + _PLY_TYPES[ptype])
                                rec[pname] = float(np.frombuffer(body, sdt, 1, offset)[0])
                                offset += sdt.itemsize
                        except ValueError:
                            raise ParseError(f"{path}: truncated binary element '{name}'") from None
                    records.append(rec)
            _collect(result, name, props, records)
    if result["points"] is None:
        raise ParseError(f"{path}: no vertex element")
    return result


def _collect(result: dict, name: str, props, records) -> None:
    names = [p for p, _ in props]
    if name == "vertex":
        if not all(k in names for k in ("x", "y", "z")):
            raise ParseError("vertex element lacks x/y/z")
        get = (lambda k: np.asarray(records[k], dtype=np.float64)) if isinstance(records, np.ndarray) \
            else (lambda k: np.asarray([r[k] for r in records], dtype=np.float64))
        result["points"] = np.stack([get("x"), get("y"), get("z")], axis=1).reshape(-1, 3)
        if all(k in names for k in ("nx", "ny", "nz")):
            result["normals"] = np.stack([get("nx"), get("ny"), get("nz")], axis=1).reshape(-1, 3)
    elif name == "face":
        key = next((k for k in ("vertex_indices", "vertex_index") if k in names), None)
        if key is None:
            return
        tris = []
        for r in records:
            idx = list(r[key])
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                tris.append((idx[0], idx[k], idx[k + 1]))
        result["faces"] = np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def write_ply_mesh(path, vertices: np.ndarray, faces: np.ndarray) -> None:
    """Binary little-endian PLY with float64 vertices and int32 triangle lists."""
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(vertices)}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {len(faces)}\n"
        "property list uchar int vertex_indices\nend_header\n"
    ).encode("ascii")
    body = np.asarray(vertices, dtype="<f8").tobytes()
    face_dt = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
    frec = np.empty(len(faces), dtype=face_dt)
    frec["n"] = 3
    frec["idx"] = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    atomic_write_bytes(Path(path), header + body + frec.tobytes())


def write_obj(path, vertices: np.ndarray, faces: np.ndarray, header: str = "pinc mesh") -> None:
    """OBJ with 9 significant digits and 1-based indices."""
    out = [f"# {line}" for line in header.splitlines()]
    out.append(f"# vertices {len(vertices)} faces {len(faces)}")
    out.extend("v {:.9g} {:.9g} {:.9g}".format(*v) for v in np.asarray(vertices))
    out.extend("f {} {} {}".format(*(int(i) + 1 for i in f)) for f in np.asarray(faces))
    atomic_write_text(Path(path), "\n".join(out) + "\n")


def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            try:
                if toks[0] == "v":
                    verts.append([float(t) for t in toks[1:4]])
                    if len(verts[-1]) != 3:
                        raise ValueError("vertex needs 3 coordinates")
                elif toks[0] == "f":
                    idx = [int(t.split("/")[0]) for t in toks[1:]]
                    idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                    for k in range(1, len(idx) - 1):
                        faces.append((idx[0], idx[k], idx[k + 1]))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return (
        np.asarray(verts, dtype=np.float64).reshape(-1, 3),
        np.asarray(faces, dtype=np.int64).reshape(-1, 3),
    )


def read_points(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Dispatch on suffix: .xyz/.txt/.pts, .ply (vertices), .obj (vertices)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        d = read_ply(path)
        return d["points"], d["normals"]
    if suffix == ".obj":
        return read_obj(path)[0], None
    return read_xyz(path)


def read_mesh(path) -> tuple[np.ndarray, np.ndarray]:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        d = read_ply(path)
        faces = d["faces"] if d["faces"] is not None else np.zeros((0, 3), np.int64)
        return d["points"], faces
    if suffix == ".obj":
        return read_obj(path)
    raise ParseError(f"{path}: unsupported mesh format")
