"""YAML serialization is routed through here, allowing some things to be
better controlled (key order, numpy scalars, multi-line strings and the
tagged header documents of field files)."""

from typing import Any, Dict, Type

import numpy as np
import yaml

__all__ = [
    "yaml_dump",
    "yaml_load",
    "yaml_load_tagged",
    "YAMLObject",
]


class YAMLObject(yaml.YAMLObject):
  """Base for objects written as a tagged mapping.

  Subclasses set `yaml_tag` and implement `to_yaml_custom_dict`; reading back
  goes through `yaml_load_tagged`, which returns the plain mapping.
  """

  @classmethod
  def to_yaml(cls, dumper, self):
    """Default to a custom dictionary mapping."""
    return dumper.represent_mapping(cls.yaml_tag, self.to_yaml_custom_dict())

  def to_yaml_custom_dict(self) -> Dict[str, Any]:
    raise NotImplementedError()


def multiline_str_representer(dumper, data):
  if len(data.splitlines()) > 1:
    return dumper.represent_scalar('tag:yaml.org,2002:str', data, style='|')
  else:
    return dumper.represent_scalar('tag:yaml.org,2002:str', data)


def numpy_float_representer(dumper, data):
  return dumper.represent_float(float(data))


def numpy_int_representer(dumper, data):
  return dumper.represent_int(int(data))


yaml.add_representer(str, multiline_str_representer)
yaml.add_representer(np.float64, numpy_float_representer)
yaml.add_representer(np.float32, numpy_float_representer)
yaml.add_representer(np.int64, numpy_int_representer)
yaml.add_representer(np.int32, numpy_int_representer)
yaml.add_representer(np.bool_,
                     lambda dumper, data: dumper.represent_bool(bool(data)))


def yaml_dump(data, sort_keys=False, **kwargs):
  return yaml.dump(data, sort_keys=sort_keys, **kwargs)


def yaml_load(text: str) -> Any:
  """Loads untagged YAML (configuration files)."""
  return yaml.safe_load(text)


def yaml_load_tagged(text: str, cls: Type[YAMLObject]) -> Dict[str, Any]:
  """Loads a document written from `cls`, returning its mapping."""

  class _Loader(yaml.SafeLoader):
    pass

  def construct(loader, node):
    return loader.construct_mapping(node, deep=True)

  _Loader.add_constructor(cls.yaml_tag, construct)
  data = yaml.load(text, Loader=_Loader)
  if not isinstance(data, dict):
    raise ValueError(f"Expected a {cls.yaml_tag} mapping, got: {type(data)}")
  return data
