"""Dataset and schema registry.

The catalog maps names to opened datasets and to standalone schemas.
Registration is idempotent when the content is identical; registering
a different artifact under a taken name is an error.
"""

from tesserflow.errors import TesserflowError
from tesserflow.fdb.dataset import FdbDataset, open_fdb


class UnknownDataset(TesserflowError):
    pass


class DuplicateName(TesserflowError):
    pass


class Catalog:
    def __init__(self):
        self._datasets = {}  # name -> FdbDataset
        self._schemas = {}  # name -> Schema

    def register_dataset(self, name: str, source) -> FdbDataset:
        """Register an opened FdbDataset or a dataset directory path."""
        ds = source if isinstance(source, FdbDataset) else open_fdb(source)
        held = self._datasets.get(name)
        if held is not None:
            if held.root == ds.root and held.schema == ds.schema:
                return held
            raise DuplicateName(f"dataset name {name!r} is already registered")
        self._datasets[name] = ds
        return ds

    def register_schema(self, name: str, schema):
        held = self._schemas.get(name)
        if held is not None:
            if held == schema:
                return held
            raise DuplicateName(f"schema name {name!r} is already registered")
        self._schemas[name] = schema
        return schema

    def dataset(self, name: str) -> FdbDataset:
        ds = self._datasets.get(name)
        if ds is None:
            raise UnknownDataset(f"no dataset registered as {name!r}")
        return ds

    def schema(self, name: str):
        s = self._schemas.get(name)
        if s is None:
            ds = self._datasets.get(name)
            if ds is not None:
                return ds.schema
            raise UnknownDataset(f"no schema registered as {name!r}")
        return s

    def list_datasets(self) -> list:
        return sorted(self._datasets)

    def list_schemas(self) -> list:
        return sorted(set(self._schemas) | set(self._datasets))

    def close(self):
        for ds in self._datasets.values():
            ds.close()
        self._datasets.clear()
