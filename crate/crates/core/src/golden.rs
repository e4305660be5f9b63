//! The February 2020 margin-trade attack bundle, reconstructed call-by-call
//! so the published classification falls out exactly: the dYdX loan spans
//! internal calls 2..188, the Compound borrow 21..46, the bZx margin trade
//! 47..174 and the two Uniswap swaps 158..161 and 176..180.
//!
//! Token and lending-protocol addresses are the mainnet deployments; the
//! attacker, bZx and exchange contract addresses are modeled stand-ins (see
//! fixtures/README.md). Call counts between the anchor indexes reproduce
//! the published index arithmetic, not the byte-level mainnet trace.

use crate::abi::{self, Token};
use crate::model::{
    Address, EventLog, InternalCall, Selector, TopicHash, TransactionBundle, TxHash, U256,
};
use crate::registry::sig;

/// Transaction hash of the attack (mainnet, 2020-02-15).
pub const BZX_HACK_TX: &str = "0xb5c8bd9430b6cc87a0e2fe110ece6bf527fa4f170a4bc8cd032f768fc5219838";
pub const BZX_HACK_BLOCK: u64 = 9_484_688;

const WETH: &str = "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2";
const WBTC: &str = "0x2260fac5e5542a773aa44fbcfedf7c193bc2c599";
const CWBTC: &str = "0xc11b1268c1a384e55c48c2391d8d480264a3a7f4";
const CETH: &str = "0x4ddc2d193948926d02f9b1fe9e1daa0718270ed5";
const COMPTROLLER: &str = "0x3d9819210a31b4961b30ef54be2aed79b9c9cd3a";

/// Modeled stand-in addresses, prefixed 0x90.
fn modeled(index: u8) -> Address {
    let mut bytes = [0u8; 20];
    bytes[0] = 0x90;
    bytes[19] = index;
    Address(bytes)
}

fn addr(text: &str) -> Address {
    Address::from_hex(text).expect("constant address")
}

fn topic(text: &str) -> TopicHash {
    TopicHash::from_hex(text).expect("constant hash")
}

fn topic_of(address: Address) -> TopicHash {
    TopicHash(address.to_word())
}

fn dec(text: &str) -> U256 {
    U256::from_dec_str(text).expect("constant amount")
}

struct Fixture {
    calls: Vec<InternalCall>,
    logs: Vec<EventLog>,
}

impl Fixture {
    fn push(
        &mut self,
        depth: u32,
        caller: Address,
        callee: Address,
        selector: Option<Selector>,
        calldata: Vec<u8>,
        value: U256,
    ) -> u32 {
        let index = self.calls.len() as u32;
        self.calls.push(InternalCall {
            index,
            depth,
            caller,
            callee,
            selector,
            calldata,
            value,
        });
        index
    }

    fn simple(&mut self, depth: u32, caller: Address, callee: Address, signature: &str) -> u32 {
        let selector = abi::selector_of(signature);
        self.push(
            depth,
            caller,
            callee,
            Some(selector),
            selector.0.to_vec(),
            U256::zero(),
        )
    }

    fn transfer(
        &mut self,
        depth: u32,
        caller: Address,
        token: Address,
        to: Address,
        amount: U256,
    ) -> u32 {
        let calldata = abi::encode_call(
            crate::model::SEL_TRANSFER,
            &[Token::Address(to), Token::Uint(amount)],
        );
        let index = self.push(
            depth,
            caller,
            token,
            Some(crate::model::SEL_TRANSFER),
            calldata,
            U256::zero(),
        );
        self.log(
            token,
            vec![
                topic("0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"),
                topic_of(caller),
                topic_of(to),
            ],
            abi::encode_tokens(&[Token::Uint(amount)]),
        );
        index
    }

    fn transfer_from(
        &mut self,
        depth: u32,
        caller: Address,
        token: Address,
        from: Address,
        to: Address,
        amount: U256,
    ) -> u32 {
        let calldata = abi::encode_call(
            crate::model::SEL_TRANSFER_FROM,
            &[
                Token::Address(from),
                Token::Address(to),
                Token::Uint(amount),
            ],
        );
        let index = self.push(
            depth,
            caller,
            token,
            Some(crate::model::SEL_TRANSFER_FROM),
            calldata,
            U256::zero(),
        );
        self.log(
            token,
            vec![
                topic("0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"),
                topic_of(from),
                topic_of(to),
            ],
            abi::encode_tokens(&[Token::Uint(amount)]),
        );
        index
    }

    fn log(&mut self, emitter: Address, topics: Vec<TopicHash>, data: Vec<u8>) {
        let after_call_index = self.calls.len() as u32 - 1;
        let log_index = self.logs.len() as u32;
        self.logs.push(EventLog {
            log_index,
            emitter,
            topics,
            data,
            after_call_index,
        });
    }
}

/// dYdX account-update payload: [accountNumber, market, sign, delta,
/// parSign, parValue, to].
fn solo_update(asset: Address, amount: U256, to: Address) -> Vec<u8> {
    abi::encode_tokens(&[
        Token::Uint(U256::zero()),
        Token::Address(asset),
        Token::Uint(U256::one()),
        Token::Uint(amount),
        Token::Uint(U256::one()),
        Token::Uint(amount),
        Token::Address(to),
    ])
}

/// Builds the attack bundle. Anchor indexes are asserted so any drift in the
/// surrounding structure fails loudly.
pub fn bzx_hack_bundle() -> TransactionBundle {
    let registry = crate::registry::load_default();
    let solo = registry.book.dydx_solo_margin;

    let weth = addr(WETH);
    let wbtc = addr(WBTC);
    let cwbtc = addr(CWBTC);
    let ceth = addr(CETH);
    let comptroller = addr(COMPTROLLER);

    let eoa = modeled(0x01);
    let att = modeled(0x02);
    let bzx = modeled(0x03);
    let bzx_ptoken = modeled(0x04);
    let univ1x = modeled(0x05);
    let bzx_vault = modeled(0x06);
    let bzx_oracle = modeled(0x07);
    let price_oracle = modeled(0x08);
    let interest_model = modeled(0x09);

    let ten_thousand_eth = dec("10000000000000000000000");
    let margin_eth = dec("1300000000000000000000");
    let borrowed_wbtc = dec("11200000000"); // 112 WBTC, 8 decimals
    let bought_wbtc = dec("5134000000"); // 51.34 WBTC
    let sold_eth = dec("5637620000000000000000");
    let swapped_out_eth = dec("6871410000000000000000");
    let profit_eth = dec("71000000000000000000");

    let mut f = Fixture {
        calls: Vec::with_capacity(190),
        logs: Vec::with_capacity(16),
    };

    // 0: the external call into the attacker contract
    let exec = abi::selector_of("execute(bytes)");
    f.push(0, eoa, att, Some(exec), exec.0.to_vec(), U256::zero());
    // 1: setup
    f.simple(1, att, weth, "approve(address,uint256)");

    // 2: operate() on the margin protocol; the three opening logs fire
    // before any child call executes
    let operate = f.simple(1, att, solo, "operate((address,uint256)[],bytes[])");
    assert_eq!(operate, 2);
    f.log(
        solo,
        vec![topic(sig::DYDX_LOG_OPERATE), topic_of(att)],
        Vec::new(),
    );
    f.log(
        solo,
        vec![topic(sig::DYDX_LOG_CALL), topic_of(att)],
        solo_update(weth, U256::zero(), att),
    );
    f.log(
        solo,
        vec![topic(sig::DYDX_LOG_WITHDRAW), topic_of(att)],
        solo_update(weth, ten_thousand_eth, att),
    );

    // 3: loan disbursement
    let disburse = f.transfer(2, solo, weth, att, ten_thousand_eth);
    assert_eq!(disburse, 3);

    // 4: callFunction into the attacker contract: the attack body
    f.simple(
        2,
        solo,
        att,
        "callFunction(address,(address,uint256),bytes)",
    );

    // 5..=20: Compound setup (collateral deposit, market entry, accruals);
    // the collateral-deposit events are intentionally not realized, only the
    // published rows appear in this reconstruction
    let prep: [(u32, Address, Address, &str); 16] = [
        (3, att, weth, "approve(address,uint256)"),
        (3, att, comptroller, "enterMarkets(address[])"),
        (4, comptroller, price_oracle, "getUnderlyingPrice(address)"),
        (3, att, ceth, "mint()"),
        (4, ceth, comptroller, "mintAllowed(address,address,uint256)"),
        (5, comptroller, price_oracle, "getUnderlyingPrice(address)"),
        (
            4,
            ceth,
            interest_model,
            "getBorrowRate(uint256,uint256,uint256)",
        ),
        (3, att, wbtc, "approve(address,uint256)"),
        (3, att, cwbtc, "accrueInterest()"),
        (
            4,
            cwbtc,
            interest_model,
            "getBorrowRate(uint256,uint256,uint256)",
        ),
        (3, att, price_oracle, "getUnderlyingPrice(address)"),
        (3, att, cwbtc, "exchangeRateCurrent()"),
        (
            4,
            cwbtc,
            interest_model,
            "getBorrowRate(uint256,uint256,uint256)",
        ),
        (3, att, comptroller, "getAccountLiquidity(address)"),
        (4, comptroller, price_oracle, "getUnderlyingPrice(address)"),
        (4, comptroller, ceth, "getAccountSnapshot(address)"),
    ];
    for (depth, caller, callee, signature) in prep {
        f.simple(depth, caller, callee, signature);
    }

    // 21: borrow(uint256) on the WBTC market
    let borrow_call = f.push(
        3,
        att,
        cwbtc,
        Some(abi::selector_of("borrow(uint256)")),
        abi::encode_call(
            abi::selector_of("borrow(uint256)"),
            &[Token::Uint(borrowed_wbtc)],
        ),
        U256::zero(),
    );
    assert_eq!(borrow_call, 21);

    // 22..=44: allowance checks, accrual and snapshots inside the borrow
    f.simple(
        4,
        cwbtc,
        comptroller,
        "borrowAllowed(address,address,uint256)",
    );
    f.simple(5, comptroller, price_oracle, "getUnderlyingPrice(address)");
    f.simple(5, comptroller, cwbtc, "getAccountSnapshot(address)");
    f.simple(5, comptroller, ceth, "getAccountSnapshot(address)");
    for _ in 26..=44 {
        f.simple(
            4,
            cwbtc,
            interest_model,
            "getBorrowRate(uint256,uint256,uint256)",
        );
    }
    // 45: the borrowed WBTC leaves the market
    let wbtc_out = f.transfer(4, cwbtc, wbtc, att, borrowed_wbtc);
    assert_eq!(wbtc_out, 45);
    // 46: verification hook, then the market logs the borrow
    f.simple(
        4,
        cwbtc,
        comptroller,
        "borrowVerify(address,address,uint256)",
    );
    f.log(
        cwbtc,
        vec![topic(sig::COMPOUND_BORROW), topic_of(att), topic_of(att)],
        abi::encode_tokens(&[
            Token::Address(cwbtc),
            Token::Address(wbtc),
            Token::Uint(borrowed_wbtc),
        ]),
    );

    // 47: the margin trade opens with 1,300 ETH margin
    let margin_call = f.push(
        3,
        att,
        bzx,
        Some(Selector::from_hex(sig::BZX_MINT_WITH_ETHER_SEL_1).unwrap()),
        abi::encode_call(
            Selector::from_hex(sig::BZX_MINT_WITH_ETHER_SEL_1).unwrap(),
            &[Token::Address(att)],
        ),
        margin_eth,
    );
    assert_eq!(margin_call, 47);

    // 48..=157: position setup and routing inside the margin trade
    f.simple(4, bzx, bzx_vault, "deposit(address,uint256)");
    f.simple(4, bzx, bzx_oracle, "getTradeData(address,address,uint256)");
    for _ in 50..=52 {
        f.simple(5, bzx_oracle, price_oracle, "getPrice(address)");
    }
    for _ in 53..=89 {
        f.simple(4, bzx, bzx_vault, "updatePosition(address,uint256)");
    }
    for _ in 90..=95 {
        f.simple(5, bzx_vault, bzx_oracle, "checkMargin(address)");
    }
    for _ in 96..=119 {
        f.simple(4, bzx, bzx_oracle, "getTradeData(address,address,uint256)");
    }
    for _ in 120..=123 {
        f.simple(5, bzx_oracle, price_oracle, "getPrice(address)");
    }
    for _ in 124..=157 {
        f.simple(4, bzx, bzx_vault, "updatePosition(address,uint256)");
    }

    // 158: the margin engine sells 5,637.62 ETH for WBTC on the exchange
    let first_swap = f.push(
        4,
        bzx,
        univ1x,
        Some(abi::selector_of("ethToTokenSwapInput(uint256,uint256)")),
        abi::encode_call(
            abi::selector_of("ethToTokenSwapInput(uint256,uint256)"),
            &[Token::Uint(U256::one()), Token::Uint(dec("1581938400"))],
        ),
        sold_eth,
    );
    assert_eq!(first_swap, 158);
    let wbtc_to_bzx = f.transfer(5, univ1x, wbtc, bzx, bought_wbtc);
    assert_eq!(wbtc_to_bzx, 159);
    f.simple(5, univ1x, wbtc, "balanceOf(address)");
    f.simple(5, univ1x, wbtc, "balanceOf(address)");
    f.log(
        univ1x,
        vec![
            topic(sig::UNIV1_TOKEN_PURCHASE),
            topic_of(bzx),
            topic_of(bzx),
        ],
        abi::encode_tokens(&[
            Token::Address(weth),
            Token::Address(wbtc),
            Token::Uint(sold_eth),
        ]),
    );

    // 162..=174: position bookkeeping, then the margin token mints
    for _ in 162..=174 {
        f.simple(4, bzx, bzx_vault, "updatePosition(address,uint256)");
    }
    f.log(
        bzx,
        vec![topic(sig::BZX_MINT_MARGIN), topic_of(att)],
        abi::encode_tokens(&[
            Token::Address(weth),
            Token::Address(bzx_ptoken),
            Token::Uint(margin_eth),
        ]),
    );

    // 175: approval for the second swap
    f.simple(3, att, wbtc, "approve(address,uint256)");

    // 176: the attacker dumps the 112 borrowed WBTC for ETH
    let second_swap = f.push(
        3,
        att,
        univ1x,
        Some(abi::selector_of(
            "tokenToEthSwapInput(uint256,uint256,uint256)",
        )),
        abi::encode_call(
            abi::selector_of("tokenToEthSwapInput(uint256,uint256,uint256)"),
            &[
                Token::Uint(borrowed_wbtc),
                Token::Uint(U256::one()),
                Token::Uint(dec("1581938400")),
            ],
        ),
        U256::zero(),
    );
    assert_eq!(second_swap, 176);
    let wbtc_in = f.transfer_from(4, univ1x, wbtc, att, univ1x, borrowed_wbtc);
    assert_eq!(wbtc_in, 177);
    // raw Ether back to the attacker
    f.push(4, univ1x, att, None, Vec::new(), swapped_out_eth);
    f.simple(4, univ1x, wbtc, "balanceOf(address)");
    f.simple(4, univ1x, wbtc, "balanceOf(address)");
    f.log(
        univ1x,
        vec![topic(sig::UNIV1_ETH_PURCHASE), topic_of(att), topic_of(att)],
        abi::encode_tokens(&[
            Token::Address(wbtc),
            Token::Address(weth),
            Token::Uint(borrowed_wbtc),
        ]),
    );

    // 181..=187: wrap ETH and stage the repayment
    f.push(
        3,
        att,
        weth,
        Some(abi::selector_of("deposit()")),
        abi::selector_of("deposit()").0.to_vec(),
        swapped_out_eth,
    );
    f.simple(3, att, weth, "approve(address,uint256)");
    f.simple(3, att, weth, "balanceOf(address)");
    f.simple(3, att, wbtc, "balanceOf(address)");
    f.simple(3, att, comptroller, "getAccountLiquidity(address)");
    f.simple(4, comptroller, price_oracle, "getUnderlyingPrice(address)");
    f.simple(3, att, weth, "balanceOf(address)");

    // 188: repayment pulls the 10,000 WETH back into the margin protocol
    let repay = f.transfer_from(2, solo, weth, att, solo, ten_thousand_eth);
    assert_eq!(repay, 188);
    f.log(
        solo,
        vec![topic(sig::DYDX_LOG_DEPOSIT), topic_of(att)],
        solo_update(weth, ten_thousand_eth, att),
    );

    // 189: profit out
    f.transfer(1, att, weth, eoa, profit_eth);
    assert_eq!(f.calls.len(), 190);

    let bundle = TransactionBundle {
        tx_hash: TxHash::from_hex(BZX_HACK_TX).expect("constant hash"),
        block_number: BZX_HACK_BLOCK,
        tx_index: 1,
        sender: eoa,
        reverted: false,
        calls: f.calls,
        logs: f.logs,
    };
    bundle.validate().expect("golden fixture invariants");
    bundle
}
