"""Flat key-value experiment configuration files.

Format: UTF-8 text, ``#`` comments, ``[section]`` headers, and
``key = value`` lines.  Values may be numbers, booleans, bare words,
inline tables ``{k = v, ...}`` or bracketed lists ``[a, b, ...]`` (which
nest, so mode tables like ``[[1, 0.5], [3, -0.25]]`` work).  Top-level
keys before the first section land in the "" section; an inline-table
value is equivalent to a section of the same name, e.g.

    phi = {kind = cubic, m = 3}

and

    [phi]
    kind = cubic
    m = 3

produce the same nested mapping.
"""

from __future__ import annotations

from .errors import ConfigError


def _parse_scalar(tok: str, line_no: int, key: str):
    tok = tok.strip()
    if not tok:
        raise ConfigError("empty value", line=line_no, key=key)
    low = tok.lower()
    if low in ("true", "on", "yes"):
        return True
    if low in ("false", "off", "no"):
        return False
    if low in ("inf", "+inf"):
        return float("inf")
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    if (tok.startswith('"') and tok.endswith('"')) or \
       (tok.startswith("'") and tok.endswith("'")):
        return tok[1:-1]
    if any(ch in tok for ch in "{}[]=,"):
        raise ConfigError(f"cannot parse value {tok!r}", line=line_no, key=key)
    return tok


def _split_top_level(body: str, line_no: int, key: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth < 0:
                raise ConfigError("unbalanced brackets", line=line_no, key=key)
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ConfigError("unbalanced brackets", line=line_no, key=key)
    tail = "".join(cur).strip()
    if tail:
        parts.append(tail)
    return parts


def _parse_value(tok: str, line_no: int, key: str):
    tok = tok.strip()
    if tok.startswith("[") and tok.endswith("]"):
        return [_parse_value(p, line_no, key)
                for p in _split_top_level(tok[1:-1], line_no, key)]
    if tok.startswith("{") and tok.endswith("}"):
        table = {}
        for item in _split_top_level(tok[1:-1], line_no, key):
            if "=" not in item:
                raise ConfigError(f"inline table entry {item!r} needs '='",
                                  line=line_no, key=key)
            k, v = item.split("=", 1)
            table[k.strip()] = _parse_value(v, line_no, key)
        return table
    return _parse_scalar(tok, line_no, key)


def _strip_comment(line: str) -> str:
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def parse_config_text(text: str) -> dict:
    """Parse config text into {section: {key: value}}; raises ConfigError."""
    sections: dict = {"": {}}
    current = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}",
                                  line=line_no)
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}",
                              line=line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("empty key", line=line_no)
        parsed = _parse_value(value, line_no, key)
        if isinstance(parsed, dict):
            # inline tables are equivalent to a section of the same name
            sections.setdefault(key, {}).update(parsed)
        else:
            sections[current][key] = parsed
    return sections


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}")
    return parse_config_text(text)


def flatten(sections: dict) -> dict:
    """Flat ``section.key`` view used when echoing a config into reports."""
    flat = {}
    for sec in sorted(sections):
        for key in sections[sec]:
            name = f"{sec}.{key}" if sec else key
            flat[name] = sections[sec][key]
    return flat
