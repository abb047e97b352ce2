import sys
import json
import logging
import os
import shlex
from dataclasses import dataclass, field
from difflib import get_close_matches
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv
from prompt_toolkit import PromptSession
from prompt_toolkit.completion import WordCompleter
from prompt_toolkit.formatted_text import HTML
from prompt_toolkit.history import FileHistory
from prompt_toolkit.styles import Style

import src.actions  # registers every command
from src.action_handler import action_registry, execute_action
from src.errors import ConfigurationError, MfoError
from src.helpers import print_h_bar
from src.project import MfoProject, config_dir, default_project_name, list_projects

logger = logging.getLogger("cli")

# commands that can run without a loaded project
PROJECTLESS = {"rerun"}


def configure_logging() -> None:
    level = os.getenv("MFO_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format='%(message)s')


def parse_flags(tokens: Sequence[str]) -> Tuple[List[str], Dict[str, Any]]:
    """Split ["a", "--epochs", "3", "--fast"] into positionals and {"epochs": "3", "fast": True}"""
    positional, flags = [], {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token.startswith("--") and len(token) > 2:
            name, _, value = token[2:].partition("=")
            name = name.replace("-", "_")
            if value:
                flags[name] = value
            elif i + 1 < len(tokens) and not tokens[i + 1].startswith("--"):
                flags[name] = tokens[i + 1]
                i += 1
            else:
                flags[name] = True
        else:
            positional.append(token)
        i += 1
    return positional, flags


def error_payload(error: Exception) -> Dict[str, str]:
    code = error.code if isinstance(error, MfoError) else "error"
    return {"error": code, "type": type(error).__name__, "message": str(error)}


@dataclass
class Command:
    """Dataclass to represent a CLI command"""
    name: str
    description: str
    tips: List[str]
    handler: Callable
    aliases: List[str] = field(default_factory=list)


class MfoCLI:
    def __init__(self):
        load_dotenv()
        configure_logging()
        self.project: Optional[MfoProject] = None
        self.home = Path(os.getenv("MFO_HOME", str(Path.home() / ".mfo"))).expanduser()
        self.session = None
        self._initialize_commands()

    def _initialize_commands(self) -> None:
        self.commands: Dict[str, Command] = {}
        self._register_command(Command(
            name="help",
            description="Displays a list of all available commands, or help for a specific command.",
            tips=["Try 'help {command}' to see the flags of a command."],
            handler=self.help,
            aliases=['h', '?'],
        ))
        self._register_command(Command(
            name="clear",
            description="Clears the terminal screen.",
            tips=[],
            handler=self.clear_screen,
            aliases=['cls'],
        ))
        self._register_command(Command(
            name="list-projects",
            description="Lists the project files in the config directory.",
            tips=["The config directory is set with MFO_CONFIG_DIR"],
            handler=self.list_projects,
            aliases=['projects'],
        ))
        self._register_command(Command(
            name="load-project",
            description="Loads a project file.",
            tips=["Format: load-project {project_name}"],
            handler=self.load_project,
            aliases=['load'],
        ))
        self._register_command(Command(
            name="exit",
            description="Exits the CLI.",
            tips=[],
            handler=self.exit,
            aliases=['quit', 'q'],
        ))
        for name, action in sorted(action_registry.items()):
            tips = [f"--{p.name.replace('_', '-')}{' (required)' if p.required else ''}: {p.description}"
                    for p in action.parameters]
            self._register_command(Command(
                name=name,
                description=action.description,
                tips=tips,
                handler=lambda input_list, name=name: self._run_action(name, input_list[1:]),
            ))

    def _setup_prompt_toolkit(self) -> None:
        self.style = Style.from_dict({
            'prompt': 'ansicyan bold',
            'command': 'ansigreen',
            'error': 'ansired bold',
        })
        self.home.mkdir(parents=True, exist_ok=True)
        self.completer = WordCompleter(list(self.commands.keys()), ignore_case=True, sentence=True)
        self.session = PromptSession(
            completer=self.completer,
            style=self.style,
            history=FileHistory(str(self.home / 'history.txt')),
        )

    ###################
    # Helper Functions
    ###################
    def _register_command(self, command: Command) -> None:
        self.commands[command.name] = command
        for alias in command.aliases:
            self.commands[alias] = command

    def _get_prompt_message(self) -> HTML:
        status = f"({self.project.project_name})" if self.project else "(no project)"
        return HTML(f'<prompt>MFO-CLI</prompt> {status} > ')

    def _handle_command(self, input_string: str) -> None:
        try:
            input_list = shlex.split(input_string)
        except ValueError as e:
            logger.error(f"Error parsing command: {e}")
            return

        command_string = input_list[0].lower()
        try:
            command = self.commands.get(command_string)
            if command:
                command.handler(input_list)
            else:
                self._handle_unknown_command(command_string)
        except MfoError as e:
            logger.error(f"{type(e).__name__}: {e}")
        except Exception as e:
            logger.error(f"Error executing command: {e}")

    def _handle_unknown_command(self, command: str) -> None:
        logger.warning(f"Unknown command: '{command}'")
        suggestions = get_close_matches(command, self.commands.keys(), n=3, cutoff=0.6)
        if suggestions:
            logger.info("Did you mean one of these?")
            for suggestion in suggestions:
                logger.info(f"  - {suggestion}")
        logger.info("Use 'help' to see all available commands.")

    def _load_project(self, name: Optional[str] = None) -> MfoProject:
        name = name or default_project_name()
        if not name:
            raise ConfigurationError(f"No project given and {config_dir() / 'general.json'} names no default_project")
        self.project = MfoProject(name)
        return self.project

    def _run_action(self, name: str, tokens: Sequence[str]):
        positional, params = parse_flags(tokens)
        if positional:
            raise ConfigurationError(f"Unexpected arguments for {name}: {' '.join(positional)}")
        project_name = params.pop("project", None)
        if project_name or (self.project is None and name not in PROJECTLESS):
            self._load_project(project_name)
        result = execute_action(self.project, name, **params)
        if result is not None:
            logger.info(f"{name} finished: {result}")
        return result

    ###################
    # Command functions
    ###################
    def help(self, input_list: List[str]) -> None:
        if len(input_list) > 1:
            command = self.commands.get(input_list[1])
            if command is None:
                self._handle_unknown_command(input_list[1])
                return
            logger.info(f"\nHelp for '{command.name}':")
            logger.info(f"Description: {command.description}")
            if command.aliases:
                logger.info(f"Aliases: {', '.join(command.aliases)}")
            for tip in command.tips:
                logger.info(f"  {tip}")
            return
        logger.info("\nAvailable Commands:")
        for name, command in sorted(self.commands.items()):
            if name == command.name:
                logger.info(f"  {name:<15} - {command.description}")

    def clear_screen(self, input_list: List[str]) -> None:
        os.system('cls' if os.name == 'nt' else 'clear')

    def list_projects(self, input_list: List[str]) -> None:
        projects = list_projects()
        if not projects:
            logger.info(f"No project files found in {config_dir()}")
            return
        logger.info("\nAvailable Projects:")
        for name in projects:
            logger.info(f"- {name}")

    def load_project(self, input_list: List[str]) -> None:
        if len(input_list) < 2:
            logger.info("Please specify a project name.")
            return
        self._load_project(input_list[1])
        logger.info(f"\n✅ Successfully loaded project: {self.project.name}")

    def exit(self, input_list: List[str]) -> None:
        logger.info("\nGoodbye! 👋")
        sys.exit(0)

    ###################
    # Entry points
    ###################
    def run(self, argv: Sequence[str]) -> int:
        """Execute one command and return its exit code; failures are reported on stderr as JSON"""
        try:
            if not argv:
                raise ConfigurationError("No command given")
            name = argv[0].lower()
            if name not in action_registry:
                raise ConfigurationError(f"Unknown command: {name}")
            self._run_action(name, argv[1:])
            return 0
        except Exception as e:
            sys.stderr.write(json.dumps(error_payload(e)) + "\n")
            return e.exit_code if isinstance(e, MfoError) else 1

    def main_loop(self) -> None:
        self._setup_prompt_toolkit()
        print_h_bar()
        logger.info("👋 Welcome to the MFO CLI!")
        logger.info("Type 'help' for a list of commands.")
        print_h_bar()
        try:
            self._load_project()
            logger.info(f"Loaded project: {self.project.name}")
        except MfoError as e:
            logger.error(f"Could not load the default project: {e}")

        while True:
            try:
                input_string = self.session.prompt(self._get_prompt_message(), style=self.style).strip()
                if not input_string:
                    continue
                self._handle_command(input_string)
                print_h_bar()
            except KeyboardInterrupt:
                continue
            except EOFError:
                self.exit([])
            except Exception as e:
                logger.exception(f"Unexpected error: {e}")
