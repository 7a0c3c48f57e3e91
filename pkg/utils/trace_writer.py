"""
JSONL追踪写入器
正文先写入 .part 文件，运行结束后把头记录放在第一行再拼接正文
"""

import json
import os
import shutil
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from core.errors import TraceFormatError
from models.trace import TRACE_SCHEMA_VERSION, TraceKind


def _dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


class TraceWriter:
    """追踪写入器；path为None时只计数不落盘（用于测试和预热）"""

    def __init__(self, path: Optional[Union[str, Path]] = None, keep_in_memory: bool = False):
        self.path = Path(path) if path is not None else None
        self.records = 0
        self._memory = [] if keep_in_memory else None
        self._body = None
        self._closed = False
        self.header: Optional[Dict[str, Any]] = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._part_path = self.path.with_name(self.path.name + ".part")
            self._body = open(self._part_path, "w", encoding="utf-8", newline="\n")

    @property
    def memory(self):
        return self._memory

    def emit(self, t: int, node: Optional[int], kind: TraceKind, **fields: Any):
        """写一条记录：{"t": 微秒, "node": 节点, "kind": 类型, ...}"""
        record = {"t": t, "node": node, "kind": kind.value}
        record.update(fields)
        self.records += 1
        if self._body is not None:
            self._body.write(_dumps(record))
            self._body.write("\n")
        if self._memory is not None:
            self._memory.append(record)

    def close(self, header: Dict[str, Any]):
        """写出最终文件：头记录 + 正文"""
        if self._closed:
            return
        self._closed = True
        full_header = {"kind": TraceKind.HEADER.value, "schema": TRACE_SCHEMA_VERSION}
        full_header.update(header)
        full_header["records"] = self.records
        self.header = full_header
        if self._body is None:
            return
        self._body.close()
        with open(self.path, "w", encoding="utf-8", newline="\n") as out:
            out.write(_dumps(full_header))
            out.write("\n")
            with open(self._part_path, "r", encoding="utf-8") as body:
                shutil.copyfileobj(body, out)
        os.remove(self._part_path)

    def discard(self):
        """运行失败时丢弃正文"""
        if self._body is not None and not self._closed:
            self._body.close()
            self._closed = True
            if self._part_path.exists():
                os.remove(self._part_path)


class TraceReader:
    """流式读取追踪文件，不把正文一次性读进内存

    最后一行不完整或记录数与头记录不符时视为截断，truncated=True，
    已读到的记录照常产出。
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.truncated = False
        self.bad_lines = 0
        self.count = 0
        with open(self.path, "r", encoding="utf-8") as handle:
            first = handle.readline()
        try:
            self.header: Dict[str, Any] = json.loads(first)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"追踪文件头无法解析: {self.path}", details={"error": str(e)})
        if not isinstance(self.header, dict) or self.header.get("kind") != TraceKind.HEADER.value:
            raise TraceFormatError(f"追踪文件第一行不是头记录: {self.path}")

    def __iter__(self) -> Iterator[Dict[str, Any]]:
        self.count = 0
        with open(self.path, "r", encoding="utf-8") as handle:
            handle.readline()
            for line in handle:
                if not line.endswith("\n"):
                    self.truncated = True
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    self.truncated = True
                    self.bad_lines += 1
                    continue
                self.count += 1
                yield record
        if self.header.get("records") != self.count:
            self.truncated = True

    @property
    def state(self) -> Dict[str, Any]:
        return {"truncated": self.truncated, "bad_lines": self.bad_lines}


def read_trace(path: Union[str, Path]) -> Tuple[Dict[str, Any], List[Dict[str, Any]], Dict[str, Any]]:
    """读取整个追踪文件，返回 (头记录, 正文记录列表, 读取状态)"""
    reader = TraceReader(path)
    records = list(reader)
    return reader.header, records, reader.state
