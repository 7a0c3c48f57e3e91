"""
仿真器错误类型
每个错误带一个稳定的错误码，命令行据此决定退出码
"""

from typing import Any, Dict, Optional


class OppNetError(Exception):
    """仿真器错误基类"""

    error_code = "OPPNET_ERROR"

    def __init__(
        self,
        error_message: str,
        details: Optional[Dict[str, Any]] = None,
        error_code: Optional[str] = None,
    ):
        super().__init__(error_message)
        self.error_message = error_message
        self.details = details or {}
        if error_code:
            self.error_code = error_code

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典，便于写入摘要或日志"""
        return {
            "error_code": self.error_code,
            "error_message": self.error_message,
            "details": self.details,
        }

    def __str__(self) -> str:
        return f"[{self.error_code}] {self.error_message}"

    def __reduce__(self):
        # 跨进程池传递时保留全部字段
        return (type(self), (self.error_message, self.details, self.error_code))


class SchedulingError(OppNetError):
    """事件调度到过去的时刻，说明协议逻辑有错"""

    error_code = "SCHEDULE_IN_PAST"


class ScenarioError(OppNetError):
    """场景文件不合法"""

    error_code = "SCENARIO_INVALID"

    def __init__(self, error_message: str, field_name: str = "", rule: str = ""):
        super().__init__(error_message, details={"field": field_name, "rule": rule})
        self.field_name = field_name
        self.rule = rule

    def __reduce__(self):
        return (type(self), (self.error_message, self.field_name, self.rule))


class MacLayerError(OppNetError):
    """MAC层调用顺序错误"""

    error_code = "ATTEMPT_IN_PROGRESS"


class UnsupportedDestinationError(OppNetError):
    """上行代价只对汇聚节点有定义"""

    error_code = "UNSUPPORTED_DESTINATION"


class TlvDecodeError(OppNetError):
    """路由集合TLV选项损坏"""

    error_code = "TLV_MALFORMED"


class InvariantViolation(OppNetError):
    """运行结束时的不变量检查失败"""

    error_code = "INVARIANT_VIOLATION"

    def __init__(self, assertion: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(f"不变量被破坏: {assertion}", details=details)
        self.assertion = assertion

    def __reduce__(self):
        return (type(self), (self.assertion, self.details))


class TraceFormatError(OppNetError):
    """追踪文件无法解析"""

    error_code = "TRACE_MALFORMED"
