"""Named, shaped parameter collections with a flat view for optimizers."""

import numpy as np


class ParamStore:
    """Ordered mapping name -> float64 array.

    The canonical name order fixes the flat-vector layout used by the
    optimizer and by checkpoint files.
    """

    def __init__(self, names, arrays):
        if len(names) != len(arrays):
            raise ValueError("names and arrays length mismatch")
        self.names = list(names)
        self._data = {n: np.asarray(a, dtype=np.float64) for n, a in zip(names, arrays)}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d.keys()), list(d.values()))

    def __getitem__(self, name):
        return self._data[name]

    def __setitem__(self, name, value):
        if name not in self._data:
            raise KeyError(name)
        self._data[name] = np.asarray(value, dtype=np.float64)

    def __contains__(self, name):
        return name in self._data

    def __iter__(self):
        return iter(self.names)

    def items(self):
        for n in self.names:
            yield n, self._data[n]

    @property
    def size(self):
        return sum(self._data[n].size for n in self.names)

    def shapes(self):
        return {n: self._data[n].shape for n in self.names}

    def flat(self):
        return np.concatenate([self._data[n].ravel() for n in self.names])

    def from_flat(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ValueError(f"flat vector has {vec.size} entries, expected {self.size}")
        arrays = []
        pos = 0
        for n in self.names:
            sz = self._data[n].size
            arrays.append(vec[pos : pos + sz].reshape(self._data[n].shape).copy())
            pos += sz
        return ParamStore(self.names, arrays)

    def copy(self):
        return ParamStore(self.names, [self._data[n].copy() for n in self.names])

    def allclose(self, other, rtol=0.0, atol=0.0):
        return self.names == other.names and all(
            np.allclose(self._data[n], other[n], rtol=rtol, atol=atol) for n in self.names
        )
