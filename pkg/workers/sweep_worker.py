"""Worker para execução de ajustes independentes (varreduras de quebra)."""

from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Callable, Dict, List, Optional, Sequence

from loguru import logger

from utils.errors import V2VError

ProgressCallback = Callable[[int, int], None]
StatusCallback = Callable[[str], None]


class SweepWorker:
    """
    Executa uma função sobre uma lista de itens em um pool de threads.

    Os resultados voltam na ordem dos itens, independentemente da ordem de
    conclusão. Erros do domínio (V2VError) de um item não abortam os demais:
    o item recebe o valor produzido por ao_falhar.

    Callbacks:
        progresso: Chamado a cada item concluído (atual, total)
        status: Chamado com mensagens textuais
    """

    def __init__(self, max_workers: int = 1,
                 progresso: Optional[ProgressCallback] = None,
                 status: Optional[StatusCallback] = None):
        """
        Inicializa o worker.

        Args:
            max_workers: Threads do pool (1 executa em série)
            progresso: Callback de progresso
            status: Callback de status
        """
        self._max_workers = max(1, int(max_workers))
        self._progresso = progresso
        self._status = status
        self._funcao: Optional[Callable[[Any], Any]] = None
        self._ao_falhar: Optional[Callable[[Any, Exception], Any]] = None
        self._itens: List[Any] = []
        self._rotulo = "item"
        self._cancelado = False
        self.estatisticas: Dict[str, Any] = {}

    def configurar(self, funcao: Callable[[Any], Any], itens: Sequence[Any],
                   ao_falhar: Callable[[Any, Exception], Any], rotulo: str = "item") -> None:
        """
        Configura o worker.

        Args:
            funcao: Função aplicada a cada item
            itens: Itens a processar
            ao_falhar: Constrói o resultado de um item que falhou
            rotulo: Nome do item nas mensagens
        """
        self._funcao = funcao
        self._itens = list(itens)
        self._ao_falhar = ao_falhar
        self._rotulo = rotulo
        self._cancelado = False

    def cancelar(self) -> None:
        """Solicita cancelamento (itens ainda não iniciados são pulados)."""
        self._cancelado = True

    def _emitir_status(self, mensagem: str) -> None:
        if self._status:
            self._status(mensagem)
        else:
            logger.debug(mensagem)

    def _executar_item(self, item: Any) -> Any:
        if self._cancelado:
            return None
        return self._funcao(item)

    def run(self) -> List[Any]:
        """
        Executa a varredura.

        Interrupção pelo teclado cancela os itens pendentes antes de
        propagar; os itens em execução terminam.

        Returns:
            Resultados na ordem dos itens (itens cancelados omitidos)
        """
        if self._funcao is None:
            raise RuntimeError("SweepWorker.run chamado sem configurar()")

        total = len(self._itens)
        resultados: List[Any] = [None] * total
        concluido = [False] * total
        self.estatisticas = {
            'total': total,
            'sucesso': 0,
            'falhas': 0,
            'cancelado': False,
            'detalhes': [],
        }
        self._emitir_status(f"Iniciando varredura: {total} {self._rotulo}(s), {self._max_workers} thread(s)")

        feitos = 0
        with ThreadPoolExecutor(max_workers=self._max_workers) as pool:
            futuros = {pool.submit(self._executar_item, item): i for i, item in enumerate(self._itens)}
            try:
                for futuro in as_completed(futuros):
                    i = futuros[futuro]
                    item = self._itens[i]
                    try:
                        resultado = futuro.result()
                    except V2VError as e:
                        logger.warning(f"{self._rotulo} {item}: {e}")
                        resultados[i] = self._ao_falhar(item, e)
                        concluido[i] = True
                        self.estatisticas['falhas'] += 1
                        self.estatisticas['detalhes'].append({'item': item, 'sucesso': False, 'erro': str(e)})
                    else:
                        if resultado is None and self._cancelado:
                            continue
                        resultados[i] = resultado
                        concluido[i] = True
                        self.estatisticas['sucesso'] += 1
                        self.estatisticas['detalhes'].append({'item': item, 'sucesso': True})
                    feitos += 1
                    if self._progresso:
                        self._progresso(feitos, total)
            except KeyboardInterrupt:
                self.cancelar()
                self.estatisticas['cancelado'] = True
                self._emitir_status(
                    f"Varredura interrompida: {total - feitos} {self._rotulo}(s) pendente(s) cancelado(s)"
                )
                raise

        if self._cancelado:
            self.estatisticas['cancelado'] = True
            self._emitir_status("Varredura cancelada")
        else:
            self._emitir_status(
                f"Varredura concluída: {self.estatisticas['sucesso']} ok, {self.estatisticas['falhas']} falha(s)"
            )
        return [r for r, ok in zip(resultados, concluido) if ok]
